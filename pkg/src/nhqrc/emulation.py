"""Emulating no-click dynamics with weighted ensembles of unitaries.

For a Hermitian ``H`` and jump operators ``L_l``, one short step of the
normalised no-click map generated by ``H - (i gamma/2) sum_l L_l^dagger L_l``
is reproduced by

    rho' ~ sum_l (U_+l + U_-l) rho (U_+l + U_-l)^dagger,
    U_+-l = exp(-i dt (H +- a Lbar_l)),   a = sqrt(L gamma / dt),

with ``Lbar_l`` the Hermitian root of ``L_l^dagger L_l + lambda_l``.  Odd
powers of ``a`` cancel between the ``+`` and ``-`` branches, which leaves a
one-step error of order ``dt^2`` after renormalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import matrix_exponential, trace_distance

SHIFT_MARGIN = 1.1
COLLAPSE_THRESHOLD = 1e-300


class ShiftTooSmallError(ValueError):
    """``L^dagger L + lambda`` is not positive definite."""


class EmulationCollapseError(ArithmeticError):
    """Trace of the ensemble output underflowed."""


def _as_stack(jumps) -> np.ndarray:
    arr = np.asarray(jumps, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("jump operators must be square matrices")
    return arr


def default_shift(l_op: np.ndarray) -> float:
    """``min |eig(L)|^2 + 1.1``: the smallest shift allowed for ``L`` plus a unit-and-a-bit margin."""
    ev = np.linalg.eigvals(np.asarray(l_op, dtype=complex))
    return float(np.min(np.abs(ev)) ** 2) + SHIFT_MARGIN


def shift_jump_operator(l_op: np.ndarray, lambda_bar: float, tol: float = 1e-12) -> np.ndarray:
    """Hermitian positive root ``Lbar`` of ``L^dagger L + lambda_bar * 1``.

    Raises
    ------
    ShiftTooSmallError
        If ``L^dagger L + lambda_bar`` has an eigenvalue at or below ``tol``.
    """
    l_op = np.asarray(l_op, dtype=complex)
    m = l_op.conj().T @ l_op + lambda_bar * np.eye(l_op.shape[0])
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    if w[0] <= tol:
        raise ShiftTooSmallError(
            f"shift {lambda_bar} leaves eigenvalue {w[0]:.3g} of L^dagger L + shift non-positive"
        )
    return (v * np.sqrt(w)) @ v.conj().T


def _hermitian_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * dt * w)) @ v.conj().T


@dataclass
class EmulationEnsemble:
    h: np.ndarray
    shifted: np.ndarray  # (L, d, d) Hermitian roots
    shifts: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    gamma: float
    dt: float

    @property
    def n_jumps(self) -> int:
        return self.shifted.shape[0]

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.n_jumps * self.gamma / self.dt)

    @property
    def n_unitaries(self) -> int:
        return 2 * self.n_jumps

    def gamma_rate(self, rho: np.ndarray) -> float:
        """``Gamma = sum_l Tr[rho Lbar_l^2]``."""
        sq = np.einsum("lab,lbc->lac", self.shifted, self.shifted)
        return float(np.einsum("ab,lba->", rho, sq).real)


def build_ensemble(h, jumps, gamma: float, dt: float, shifts=None) -> EmulationEnsemble:
    """Shifted operators and the ``2L`` unitaries for step size ``dt``.

    ``shifts`` defaults to :func:`default_shift` of each jump operator; a
    scalar applies to all of them.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    h = np.asarray(h, dtype=complex)
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValueError("h must be Hermitian")
    jumps = _as_stack(jumps)
    if jumps.shape[1] != h.shape[0]:
        raise ValueError("jump operators and h have different dimensions")
    n_jumps = jumps.shape[0]
    if shifts is None:
        shifts = [default_shift(l) for l in jumps]
    shifts = np.broadcast_to(np.asarray(shifts, dtype=float), (n_jumps,)).copy()
    shifted = np.stack([shift_jump_operator(l, s) for l, s in zip(jumps, shifts)])
    a = math.sqrt(n_jumps * gamma / dt)
    u_plus = np.stack([_hermitian_propagator(h + a * lb, dt) for lb in shifted])
    u_minus = np.stack([_hermitian_propagator(h - a * lb, dt) for lb in shifted])
    return EmulationEnsemble(h, shifted, shifts, u_plus, u_minus, float(gamma), float(dt))


def ensemble_output(rho: np.ndarray, ens: EmulationEnsemble) -> np.ndarray:
    """``(1/4L) sum_l (U_+l + U_-l) rho (U_+l + U_-l)^dagger`` (unit trace to first order)."""
    out = np.zeros_like(rho, dtype=complex)
    for up, um in zip(ens.u_plus, ens.u_minus):
        k = up + um
        out += k @ rho @ k.conj().T
    return out / (4 * ens.n_jumps)


def emulate_step(rho: np.ndarray, ens: EmulationEnsemble, renormalize: bool = True) -> np.ndarray:
    """One emulated step.

    The ensemble output is multiplied by ``exp(gamma dt Gamma)`` with
    ``Gamma`` taken on the input state; with ``renormalize`` the result is
    then scaled to unit trace exactly.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != ens.h.shape:
        raise ValueError(f"state shape {rho.shape} does not match ensemble {ens.h.shape}")
    out = ensemble_output(rho, ens) * math.exp(ens.gamma * ens.dt * ens.gamma_rate(rho))
    if not renormalize:
        return out
    tr = float(np.trace(out).real)
    if not tr > COLLAPSE_THRESHOLD:
        raise EmulationCollapseError(f"trace {tr:.3g} of emulated state collapsed")
    out = out / tr
    return 0.5 * (out + out.conj().T)


def emulate_evolution(rho0: np.ndarray, ens: EmulationEnsemble, n_steps: int) -> np.ndarray:
    rho = np.asarray(rho0, dtype=complex)
    for _ in range(n_steps):
        rho = emulate_step(rho, ens)
    return rho


def noclick_propagator(h, jumps, gamma: float, dt: float) -> np.ndarray:
    """``exp(-i dt (H - (i gamma/2) sum L^dagger L))``."""
    jumps = _as_stack(jumps)
    jtj = np.einsum("lba,lbc->ac", jumps.conj(), jumps)
    return matrix_exponential(-1j * dt * (np.asarray(h, dtype=complex) - 0.5j * gamma * jtj))


def exact_noclick_step(rho: np.ndarray, h, jumps, gamma: float, dt: float) -> np.ndarray:
    k = noclick_propagator(h, jumps, gamma, dt)
    out = k @ rho @ k.conj().T
    return out / np.trace(out).real


@dataclass
class ErrorScan:
    dt: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float

    @property
    def prefactor(self) -> float:
        """``C`` in the fitted envelope ``error ~ C dt^slope``."""
        return math.exp(self.intercept)

    def envelope(self, dt: float) -> float:
        return self.prefactor * dt ** self.slope


def emulation_error_scan(h, jumps, gamma: float, dt_list, rho0, shifts=None, floor: float = 1e-14) -> ErrorScan:
    """One-step trace-distance error of the emulation against the exact no-click step.

    The slope is a least-squares fit of ``log error`` against ``log dt``
    over the points above ``floor``; it is NaN when fewer than two remain.
    """
    dts = np.asarray(dt_list, dtype=float)
    if len(dts) > 1 and np.any(np.diff(dts) >= 0):
        raise ValueError("dt_list must be strictly descending")
    rho0 = np.asarray(rho0, dtype=complex)
    errs = np.empty(len(dts))
    for i, dt in enumerate(dts):
        ens = build_ensemble(h, jumps, gamma, dt, shifts)
        errs[i] = trace_distance(emulate_step(rho0, ens), exact_noclick_step(rho0, h, jumps, gamma, dt))
    ok = errs > floor
    if ok.sum() >= 2:
        slope, intercept = np.polyfit(np.log(dts[ok]), np.log(errs[ok]), 1)
    else:
        slope = intercept = math.nan
    return ErrorScan(dts, errs, float(slope), float(intercept))
