"""Inner-loop kernels.

Each kernel has a compiled variant (``*_jit``) and a vectorised numpy
variant (``*_np``).  The public name points at the compiled one unless numba
is missing or disabled through ``NHQRC_DISABLE_NUMBA``.

Basis convention used throughout the package: basis index ``b`` encodes the
spin configuration with site 0 as the most significant bit, bit value 0 is
spin up (sigma^z = +1).
"""

from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, njit


# --------------------------------------------------------------------------
# reservoir Hamiltonian (real matrix, built from bit operations)

@njit
def _reservoir_matrix_jit(n, edges, jx, jz, hx, hz, gamma):
    dim = 1 << n
    h = np.zeros((dim, dim))
    n_edges = edges.shape[0]
    for b in range(dim):
        diag = 0.0
        for e in range(n_edges):
            l = edges[e, 0]
            m = edges[e, 1]
            zl = 1.0 - 2.0 * ((b >> (n - 1 - l)) & 1)
            zm = 1.0 - 2.0 * ((b >> (n - 1 - m)) & 1)
            diag += jz * zl * zm
            if jx != 0.0:
                flip = b ^ ((1 << (n - 1 - l)) | (1 << (n - 1 - m)))
                h[flip, b] += jx
        for l in range(n):
            bit = (b >> (n - 1 - l)) & 1
            diag += hz[l] * (1.0 - 2.0 * bit)
            # -(i gamma / 2) sigma^y = [[0, -gamma/2], [gamma/2, 0]]
            nh = 0.5 * gamma if bit == 0 else -0.5 * gamma
            h[b ^ (1 << (n - 1 - l)), b] += hx[l] + nh
        h[b, b] = diag
    return h


def _reservoir_matrix_np(n, edges, jx, jz, hx, hz, gamma):
    dim = 1 << n
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1  # (dim, n)
    z = 1.0 - 2.0 * bits
    h = np.zeros((dim, dim))
    diag = z @ np.asarray(hz, dtype=float)
    for l, m in edges:
        diag += jz * z[:, l] * z[:, m]
        if jx != 0.0:
            flip = idx ^ ((1 << (n - 1 - l)) | (1 << (n - 1 - m)))
            h[flip, idx] += jx
    for l in range(n):
        flip = idx ^ (1 << (n - 1 - l))
        h[flip, idx] += hx[l] + np.where(bits[:, l] == 0, 0.5 * gamma, -0.5 * gamma)
    h[idx, idx] = diag
    return h


# --------------------------------------------------------------------------
# product of single-site x rotations, exp(-i a_l sigma^x_l), applied to rows

@njit
def _x_rotations_jit(g, angles):
    dim, cols = g.shape
    n = angles.shape[0]
    for l in range(n):
        c = np.cos(angles[l])
        s = np.sin(angles[l])
        mask = 1 << (n - 1 - l)
        for b0 in range(dim):
            if b0 & mask:
                continue
            b1 = b0 | mask
            for k in range(cols):
                a0 = g[b0, k]
                a1 = g[b1, k]
                # -i*s*a = s*(a.imag - 1j*a.real)
                g[b0, k] = c * a0 + s * complex(a1.imag, -a1.real)
                g[b1, k] = c * a1 + s * complex(a0.imag, -a0.real)
    return g


def _x_rotations_np(g, angles):
    if not g.flags.c_contiguous:
        raise ValueError("apply_x_rotations needs a C-contiguous array")
    dim, cols = g.shape
    n = len(angles)
    for l in range(n):
        c, s = np.cos(angles[l]), np.sin(angles[l])
        view = g.reshape(1 << l, 2, dim >> (l + 1), cols)
        a0 = view[:, 0].copy()
        a1 = view[:, 1]
        view[:, 0] = c * a0 - 1j * s * a1
        view[:, 1] = c * a1 - 1j * s * a0
    return g


# --------------------------------------------------------------------------
# basis-state weights of an (unnormalised) factor G, rho = G G^dagger

@njit
def _row_weights_jit(g):
    dim, cols = g.shape
    p = np.zeros(dim)
    total = 0.0
    for b in range(dim):
        acc = 0.0
        for k in range(cols):
            v = g[b, k]
            acc += v.real * v.real + v.imag * v.imag
        p[b] = acc
        total += acc
    for b in range(dim):
        p[b] /= total
    return p


def _row_weights_np(g):
    p = (g.real ** 2 + g.imag ** 2).sum(axis=1)
    return p / p.sum()


# --------------------------------------------------------------------------
# batched first-order jump/no-jump step on density matrices

@njit
def _jump_step_jit(states, k0, jumps, jtj, gamma_dt, uniforms, out_sites):
    batch = states.shape[0]
    n_jumps = jumps.shape[0]
    probs = np.zeros(n_jumps)
    for t in range(batch):
        rho = states[t]
        total = 0.0
        for j in range(n_jumps):
            acc = 0.0
            m = jtj[j]
            for a in range(rho.shape[0]):
                for b in range(rho.shape[0]):
                    acc += (rho[a, b] * m[b, a]).real
            probs[j] = gamma_dt * acc
            total += probs[j]
        r = uniforms[t]
        site = -1
        cum = 0.0
        for j in range(n_jumps):
            cum += probs[j]
            if r < cum:
                site = j
                break
        if site >= 0:
            op = jumps[site]
        else:
            op = k0
        new = op @ rho @ np.ascontiguousarray(op.conj().T)
        tr = 0.0
        for a in range(new.shape[0]):
            tr += new[a, a].real
        states[t] = new / tr
        out_sites[t] = site
    return states


def _jump_step_np(states, k0, jumps, jtj, gamma_dt, uniforms, out_sites):
    probs = gamma_dt * np.einsum("tab,jba->tj", states, jtj).real
    cum = np.cumsum(probs, axis=1)
    hit = uniforms[:, None] < cum
    site = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
    ops = np.where((site >= 0)[:, None, None], jumps[np.maximum(site, 0)], k0[None])
    new = ops @ states @ np.conj(np.swapaxes(ops, 1, 2))
    tr = np.einsum("taa->t", new).real
    states[...] = new / tr[:, None, None]
    out_sites[...] = site
    return states


if HAS_NUMBA:
    reservoir_matrix = _reservoir_matrix_jit
    apply_x_rotations = _x_rotations_jit
    row_weights = _row_weights_jit
    jump_step = _jump_step_jit
else:
    reservoir_matrix = _reservoir_matrix_np
    apply_x_rotations = _x_rotations_np
    row_weights = _row_weights_np
    jump_step = _jump_step_np

NUMPY_KERNELS = {
    "reservoir_matrix": _reservoir_matrix_np,
    "apply_x_rotations": _x_rotations_np,
    "row_weights": _row_weights_np,
    "jump_step": _jump_step_np,
}
JIT_KERNELS = {
    "reservoir_matrix": _reservoir_matrix_jit,
    "apply_x_rotations": _x_rotations_jit,
    "row_weights": _row_weights_jit,
    "jump_step": _jump_step_jit,
}
