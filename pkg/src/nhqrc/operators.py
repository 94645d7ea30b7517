"""Many-body Pauli operators and the reservoir / encoding Hamiltonians."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np

from . import kernels
from .graph import RegularGraph, edge_list

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma^+ raises |down> -> |up>, basis order (up, down)
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}

MAX_ENCODING_ERROR = 0.05


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the reservoir model (energies in units of J_z)."""

    jz: float = 1.0
    jx: float = 0.0
    hx: float = 1.0
    hz: float = 0.0
    delta_x: float = 0.0
    delta_z: float = 1.0
    gamma: float = 0.0
    n: int = 8
    k: int = 4

    def __post_init__(self):
        if self.delta_x < 0 or self.delta_z < 0:
            raise ValueError("disorder half-widths must be non-negative")
        if self.n < 1:
            raise ValueError("need at least one spin")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DisorderRealization:
    eps_x: np.ndarray
    eps_z: np.ndarray


def embed_pauli(axis: str, site: int, n: int) -> np.ndarray:
    """Single-site operator ``axis`` at ``site`` of an ``n``-spin register.

    Site 0 is the leftmost Kronecker factor.
    """
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} spins")
    factors = [PAULI["i"]] * n
    factors[site] = PAULI[axis]
    return reduce(np.kron, factors)


def sample_disorder(params: ModelParams, seed=None) -> DisorderRealization:
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=(2, params.n))
    return DisorderRealization(eps_x=params.delta_x * u[0], eps_z=params.delta_z * u[1])


def local_fields(params: ModelParams, disorder: DisorderRealization) -> tuple[np.ndarray, np.ndarray]:
    hx = params.hx + np.asarray(disorder.eps_x, dtype=float)
    hz = params.hz + np.asarray(disorder.eps_z, dtype=float)
    return hx, hz


def build_reservoir_hamiltonian(
    params: ModelParams,
    graph: RegularGraph,
    disorder: DisorderRealization,
    gamma: float | None = None,
) -> np.ndarray:
    """Dense reservoir generator as a real ``2^N x 2^N`` array.

    Every undirected edge contributes ``J^x s^x s^x + J^z s^z s^z`` once.
    The non-Hermitian term ``-(i gamma/2) sum_l s^y_l`` has real entries, so
    the whole matrix is real; ``gamma`` defaults to ``params.gamma``.
    """
    if graph.n_vertices != params.n:
        raise ValueError(f"graph has {graph.n_vertices} vertices, model has N={params.n}")
    hx, hz = local_fields(params, disorder)
    if hx.shape != (params.n,) or hz.shape != (params.n,):
        raise ValueError("disorder realization does not match N")
    edges = np.array(edge_list(graph), dtype=np.int64).reshape(-1, 2)
    g = params.gamma if gamma is None else gamma
    return kernels.reservoir_matrix(params.n, edges, float(params.jx), float(params.jz), hx, hz, float(g))


def nh_direction(n: int) -> np.ndarray:
    """Real matrix of ``-(i/2) sum_l s^y_l``; H(gamma) = H(0) + gamma * this."""
    dim = 1 << n
    out = np.zeros((dim, dim))
    idx = np.arange(dim)
    for l in range(n):
        mask = 1 << (n - 1 - l)
        up = (idx & mask) == 0
        out[idx ^ mask, idx] = np.where(up, 0.5, -0.5)
    return out


def build_encoding_hamiltonian(theta: float, delta, n: int) -> np.ndarray:
    """``sum_l (theta + delta_l) s^x_l`` as a dense complex matrix."""
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    if np.any(np.abs(delta) > MAX_ENCODING_ERROR):
        raise ValueError(f"encoding errors must satisfy |delta| <= {MAX_ENCODING_ERROR}")
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    for l in range(n):
        h += (theta + delta[l]) * embed_pauli("x", l, n)
    return h


def z_sign_table(n: int) -> np.ndarray:
    """Eigenvalues of ``s^z_l`` (columns) on every basis state (rows)."""
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1.0 - 2.0 * bits


@dataclass
class ReservoirModel:
    """One disorder/graph realization of the reservoir."""

    params: ModelParams
    graph: RegularGraph
    disorder: DisorderRealization
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def sample(cls, params: ModelParams, graph_seed=None, disorder_seed=None) -> "ReservoirModel":
        from .graph import sample_regular_graph

        graph = sample_regular_graph(params.n, params.k, graph_seed)
        return cls(params, graph, sample_disorder(params, disorder_seed))

    def hamiltonian(self, gamma: float | None = None) -> np.ndarray:
        g = self.params.gamma if gamma is None else float(gamma)
        if "h0" not in self._cache:
            self._cache["h0"] = build_reservoir_hamiltonian(self.params, self.graph, self.disorder, gamma=0.0)
            self._cache["dir"] = nh_direction(self.params.n)
        return self._cache["h0"] + g * self._cache["dir"]

    def hermitian_part(self) -> np.ndarray:
        return self.hamiltonian(0.0)

    def with_gamma(self, gamma: float) -> "ReservoirModel":
        other = ReservoirModel(self.params.with_(gamma=gamma), self.graph, self.disorder)
        other._cache.update(self._cache)
        return other

    def gamma_critical_prediction(self) -> float:
        from .spectrum import gamma_critical_prediction

        return gamma_critical_prediction(self.params.hx, self.disorder.eps_x)
