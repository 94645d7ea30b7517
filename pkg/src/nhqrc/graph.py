"""Random k-regular interaction graphs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_RESTARTS = 10_000
# above this degree whole-pairing rejection succeeds with probability
# ~exp(-(k^2 - 1)/4) < 2%, so edges are placed one at a time instead
MAX_REJECTION_DEGREE = 4


class GraphSamplingError(RuntimeError):
    """Pairing model failed to produce a simple graph within the retry budget."""


@dataclass(frozen=True)
class RegularGraph:
    n_vertices: int
    degree: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = self.adjacency
        if a.shape != (self.n_vertices, self.n_vertices):
            raise ValueError(f"adjacency shape {a.shape} does not match n={self.n_vertices}")
        if not np.array_equal(a, a.T) or np.any(np.diag(a)):
            raise ValueError("adjacency must be symmetric with zero diagonal")
        if not np.all(a.sum(axis=0) == self.degree):
            raise ValueError(f"not {self.degree}-regular")

    @property
    def n_edges(self) -> int:
        return self.n_vertices * self.degree // 2


def _check_params(n: int, k: int) -> None:
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    if k >= n and not (n == 1 and k == 0):
        raise ValueError(f"degree k={k} must be smaller than n={n}")
    if (n * k) % 2:
        raise ValueError(f"n*k must be even, got n={n}, k={k}")


def sample_regular_graph(n: int, k: int, seed=None) -> RegularGraph:
    """Sample a simple k-regular graph on ``n`` vertices.

    Uses the configuration (pairing) model: ``n*k`` half-edges are shuffled
    and paired up; any pairing containing a self-loop or a repeated edge is
    thrown away and the whole pairing redrawn.  For ``k > n/2`` the pairing
    model rarely succeeds, so the ``(n-1-k)``-regular complement is sampled
    instead and inverted.  Degrees above ``MAX_REJECTION_DEGREE`` use the
    incremental (Steger-Wormald) variant, which pairs one suitable stub pair
    at a time and is only asymptotically uniform.

    Raises
    ------
    ValueError
        If ``n*k`` is odd or ``k >= n``.
    GraphSamplingError
        If no simple pairing is found within ``MAX_RESTARTS`` attempts.
    """
    _check_params(n, k)
    rng = np.random.default_rng(seed)
    if 2 * k > n:
        comp = _pairing(n, n - 1 - k, rng)
        adj = (1 - comp - np.eye(n, dtype=np.int8)).astype(np.int8)
        return RegularGraph(n, k, adj)
    return RegularGraph(n, k, _pairing(n, k, rng))


def _pairing(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 0:
        return np.zeros((n, n), dtype=np.int8)
    if k > MAX_REJECTION_DEGREE:
        return _incremental_pairing(n, k, rng)
    stubs = np.repeat(np.arange(n), k)
    for _ in range(MAX_RESTARTS):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        keys = lo * n + hi
        if len(np.unique(keys)) != len(keys):
            continue
        adj = np.zeros((n, n), dtype=np.int8)
        adj[lo, hi] = 1
        adj[hi, lo] = 1
        return adj
    raise GraphSamplingError(f"no simple {k}-regular graph on {n} vertices after {MAX_RESTARTS} pairings")


def _incremental_pairing(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Add edges one by one, choosing a vertex pair with weight ``free_u * free_v``.

    Only pairs that keep the graph simple are eligible; if none remain before
    every stub is used, start over.
    """
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(MAX_RESTARTS):
        adj = np.zeros((n, n), dtype=np.int8)
        free = np.full(n, k)
        for _ in range(n * k // 2):
            w = (free[iu] * free[ju] * (1 - adj[iu, ju])).astype(float)
            total = w.sum()
            if total == 0:
                break
            e = rng.choice(len(w), p=w / total)
            u, v = iu[e], ju[e]
            adj[u, v] = adj[v, u] = 1
            free[u] -= 1
            free[v] -= 1
        else:
            return adj
    raise GraphSamplingError(f"no simple {k}-regular graph on {n} vertices after {MAX_RESTARTS} attempts")


def edge_list(g: RegularGraph) -> list[tuple[int, int]]:
    """Edges ``(l, m)`` with ``l < m``, in lexicographic order."""
    rows, cols = np.nonzero(np.triu(g.adjacency, k=1))
    return [(int(l), int(m)) for l, m in zip(rows, cols)]


def from_edge_list(n: int, edges) -> RegularGraph:
    adj = np.zeros((n, n), dtype=np.int8)
    for l, m in edges:
        adj[l, m] = adj[m, l] = 1
    degrees = adj.sum(axis=0)
    return RegularGraph(n, int(degrees[0]) if n else 0, adj)


def write_edge_list(path, g: RegularGraph, seed=None) -> None:
    lines = [f"# n={g.n_vertices} k={g.degree} seed={seed}"]
    lines += [f"{l} {m}" for l, m in edge_list(g)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> RegularGraph:
    n = None
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                key, _, value = token.partition("=")
                if key == "n":
                    n = int(value)
            continue
        l, m = line.split()
        edges.append((int(l), int(m)))
    if n is None:
        raise ValueError(f"{path}: missing '# n=...' header")
    return from_edge_list(n, edges)
