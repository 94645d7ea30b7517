"""Time the compiled kernels against their numpy counterparts.

Run with ``python benchmarks/bench_kernels.py``.  Compilation happens in a
warm-up call that is not timed.  With ``NHQRC_DISABLE_NUMBA=1`` the "jit"
column runs the same functions uncompiled, which is only useful as a sanity
check.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from nhqrc import kernels
from nhqrc._accel import backend
from nhqrc.dynamics import reservoir_jump_operators
from nhqrc.graph import edge_list, sample_regular_graph


def cases(n: int, rng: np.random.Generator):
    dim = 1 << n
    edges = np.array(edge_list(sample_regular_graph(n, 4 if n > 4 else 2, 1)), dtype=np.int64)
    hx = 1.0 + rng.uniform(-0.5, 0.5, n)
    hz = rng.uniform(-1, 1, n)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    angles = rng.uniform(0, 0.1, n)

    small = 3
    d = 1 << small
    jumps = reservoir_jump_operators(small)
    jtj = np.einsum("lba,lbc->lac", jumps.conj(), jumps)
    k0 = np.eye(d, dtype=complex) - 0.01j * rng.normal(size=(d, d))
    batch = 256
    states = np.repeat(np.eye(d, dtype=complex)[None] / d, batch, axis=0)
    uniforms = rng.uniform(size=batch)
    sites = np.empty(batch, dtype=np.int64)

    return {
        "reservoir_matrix": lambda f: f(n, edges, 1.0, 1.0, hx, hz, 0.5),
        "apply_x_rotations": lambda f: f(g, angles),
        "row_weights": lambda f: f(g),
        "jump_step": lambda f: f(states.copy(), k0, jumps, jtj, 0.01, uniforms, sites),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8, help="number of spins")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    table = cases(args.n, rng)
    print(f"active backend: {backend()}, N = {args.n}")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'jit [ms]':>12}{'speedup':>10}")
    for name, call in table.items():
        results = {}
        for label, impl in (("numpy", kernels.NUMPY_KERNELS[name]), ("jit", kernels.JIT_KERNELS[name])):
            call(impl)  # warm-up / compile
            best = min(timeit.repeat(lambda: call(impl), repeat=args.repeat, number=args.number))
            results[label] = 1e3 * best / args.number
        print(f"{name:<20}{results['numpy']:>12.3f}{results['jit']:>12.3f}{results['numpy'] / results['jit']:>10.2f}")


if __name__ == "__main__":
    main()
