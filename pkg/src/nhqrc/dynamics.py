"""Normalised no-click dynamics, quantum-jump trajectories and state diagnostics.

Density matrices are plain complex ndarrays.  Long evolutions keep a factor
``G`` with ``rho = G G^dagger / Tr(G G^dagger)`` so positivity holds by
construction and one matrix product per step suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .operators import ReservoirModel, embed_pauli

UNDERFLOW = 1e-280
CLIP_TOL = 1e-10
CLIP_MASS_MAX = 1e-6
EXPM_NORM_LIMIT = 700.0


class DynamicsError(RuntimeError):
    pass


class NormalizationError(DynamicsError):
    """Trace of the unnormalised state vanished (dark-state annihilation)."""

    def __init__(self, trace: float):
        super().__init__(f"state normalisation collapsed, Tr = {trace:.3e}")
        self.trace = trace


class PositivityError(DynamicsError):
    pass


class StepSizeError(DynamicsError):
    pass


# --------------------------------------------------------------------------
# propagators

def matrix_exponential(m: np.ndarray, t: complex = 1.0) -> np.ndarray:
    """``exp(t * m)`` by scaling and squaring (valid for non-normal ``m``)."""
    a = np.asarray(m) * t
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix_exponential: non-finite entries")
    # the spectral abscissa of t*m is bounded by ||t*m||_1; past ~700 exp overflows
    norm = float(np.linalg.norm(a, 1)) if a.size else 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(a)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"matrix exponential overflowed (||t*m||_1 = {norm:.3e})")
    if norm > EXPM_NORM_LIMIT and np.abs(out).max() > 1e300:
        raise OverflowError(f"matrix exponential near overflow (||t*m||_1 = {norm:.3e})")
    return out


@dataclass
class Propagator:
    """``U = exp(-i t H)`` for a fixed generator."""

    matrix: np.ndarray
    t: float
    gamma: float | None = None

    @classmethod
    def from_hamiltonian(cls, h: np.ndarray, t: float, gamma: float | None = None) -> "Propagator":
        return cls(matrix_exponential(np.asarray(h, dtype=complex), -1j * t), t, gamma)


def reservoir_propagator(model: ReservoirModel, t: float, gamma: float | None = None) -> Propagator:
    g = model.params.gamma if gamma is None else gamma
    return Propagator.from_hamiltonian(model.hamiltonian(g), t, g)


# --------------------------------------------------------------------------
# states

def validate_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise ValueError(f"trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has negative eigenvalues")


def ginibre_factor(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return g / np.linalg.norm(g)


def random_mixed_state(dim: int, seed=None) -> np.ndarray:
    """Full-rank random state ``G G^dagger / Tr(G G^dagger)``, G complex Ginibre."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    g = ginibre_factor(dim, np.random.default_rng(seed))
    return factor_to_density(g)


def factor_to_density(g: np.ndarray) -> np.ndarray:
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def product_state(n: int, single: np.ndarray) -> np.ndarray:
    psi = np.array([1.0 + 0j])
    for _ in range(n):
        psi = np.kron(psi, single)
    return psi


def plus_state(n: int) -> np.ndarray:
    return product_state(n, np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0))


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _restore_invariants(rho: np.ndarray, check_positivity: bool) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    if not check_positivity:
        return rho
    w = np.linalg.eigvalsh(rho)
    if w[0] >= -CLIP_TOL:
        return rho
    w, v = np.linalg.eigh(rho)
    clipped = -w[w < 0].sum()
    if clipped > CLIP_MASS_MAX:
        raise PositivityError(f"map produced negative weight {clipped:.3e}")
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


def propagate(rho: np.ndarray, u, check_positivity: bool = True) -> np.ndarray:
    """Normalised map ``U rho U^dagger / Tr[U rho U^dagger]``."""
    um = u.matrix if isinstance(u, Propagator) else np.asarray(u)
    if um.shape[1] != rho.shape[0]:
        raise ValueError(f"dimension mismatch: U {um.shape}, rho {rho.shape}")
    out = um @ rho @ um.conj().T
    tr = np.trace(out).real
    if not tr > UNDERFLOW:
        raise NormalizationError(tr)
    return _restore_invariants(out, check_positivity)


def propagate_factor(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Factor form of :func:`propagate`; returns ``U G`` rescaled to unit Frobenius norm."""
    out = u @ g
    nrm = np.linalg.norm(out)
    if not nrm > math.sqrt(UNDERFLOW):
        raise NormalizationError(nrm ** 2)
    out /= nrm
    return out


def propagate_state(psi: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = u @ psi
    nrm = np.linalg.norm(out)
    if not nrm > math.sqrt(UNDERFLOW):
        raise NormalizationError(nrm ** 2)
    return out / nrm


# --------------------------------------------------------------------------
# diagnostics

def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``(1/2) sum |eig(a - b)|`` clipped to [0, 1]."""
    if a.shape != b.shape:
        raise ValueError("states have different dimensions")
    d = a - b
    w = np.linalg.eigvalsh(0.5 * (d + d.conj().T))
    return float(min(1.0, max(0.0, 0.5 * np.abs(w).sum())))


def distinguishing_advantage(a: np.ndarray, b: np.ndarray) -> float:
    """Optimal success probability ``(1 + D)/2`` of telling two equiprobable states apart."""
    return 0.5 * (1.0 + trace_distance(a, b))


def purity(rho: np.ndarray) -> float:
    return float(np.vdot(rho, rho).real)


def partial_transpose(rho: np.ndarray, subsystem, n: int) -> np.ndarray:
    sites = sorted(set(int(s) for s in subsystem))
    if any(not 0 <= s < n for s in sites):
        raise ValueError(f"subsystem {subsystem} not inside {n} sites")
    t = rho.reshape((2,) * (2 * n))
    perm = list(range(2 * n))
    for s in sites:
        perm[s], perm[n + s] = n + s, s
    return t.transpose(perm).reshape(rho.shape)


def logarithmic_negativity(rho: np.ndarray, subsystem, n: int | None = None) -> float:
    """``log2 || rho^{T_S} ||_1`` for the partial transpose over ``subsystem``."""
    if n is None:
        n = int(round(math.log2(rho.shape[0])))
    if 2 ** n != rho.shape[0]:
        raise ValueError("rho is not a qubit-register state")
    pt = partial_transpose(rho, subsystem, n)
    w = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(max(0.0, math.log2(np.abs(w).sum())))


def pure_state_negativity(psi: np.ndarray, subsystem, n: int) -> float:
    """Log negativity of a pure state from its Schmidt coefficients."""
    sites = sorted(set(int(s) for s in subsystem))
    rest = [s for s in range(n) if s not in sites]
    t = np.asarray(psi).reshape((2,) * n).transpose(sites + rest)
    s = np.linalg.svd(t.reshape(2 ** len(sites), -1), compute_uv=False)
    s = s / np.linalg.norm(s)
    return float(max(0.0, 2.0 * math.log2(s.sum())))


def random_subsystem(n: int, rng: np.random.Generator, size: int | None = None) -> list[int]:
    size = n // 2 if size is None else size
    return sorted(int(s) for s in rng.choice(n, size=size, replace=False))


# --------------------------------------------------------------------------
# trajectories

@dataclass
class TrajectoryRecord:
    """Time series of ensemble-averaged diagnostics."""

    times: np.ndarray
    series: dict[str, np.ndarray] = field(default_factory=dict)
    stderr: dict[str, np.ndarray] = field(default_factory=dict)
    samples: dict[str, np.ndarray] = field(default_factory=dict)
    jumps: list[tuple[int, float]] = field(default_factory=list)
    fit: dict[str, float] = field(default_factory=dict)


def _mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = samples.mean(axis=0)
    if samples.shape[0] > 1:
        err = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    else:
        err = np.zeros_like(mean)
    return mean, err


def fit_decay_rate(times, values, floor: float = 1e-6, tail: float = 0.5) -> dict[str, float]:
    """Slope of ``log values`` over the last ``tail`` fraction of samples above ``floor``.

    Samples at or below ``floor`` (round-off plateau) are discarded first,
    then the fit uses the latter ``tail`` fraction of what remains.  Returns
    the decay rate (minus the slope), its inverse ``zeta`` and the
    coefficient of determination of the linear fit.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    t, v = times[keep], values[keep]
    start = int(len(t) * (1.0 - tail))
    t, v = t[start:], v[start:]
    if len(t) < 3:
        return {"rate": math.nan, "zeta": math.nan, "r2": math.nan, "n_points": float(len(t))}
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else math.nan
    rate = -float(slope)
    return {"rate": rate, "zeta": 1.0 / rate if rate != 0 else math.inf, "r2": r2, "n_points": float(len(t))}


def distinguishability_trajectory(
    model: ReservoirModel,
    t_max: float,
    dt: float,
    seeds,
    record_every: int = 1,
) -> TrajectoryRecord:
    """Trace distance between pairs of random mixed states evolved by the normalised map.

    One pair of Ginibre states per entry of ``seeds``; the record holds the
    pair-averaged ``distance`` and ``purity`` (of the first state of each pair).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_max / dt))
    dim = 2 ** model.params.n
    u = reservoir_propagator(model, dt).matrix
    rec_idx = np.arange(0, n_steps + 1, record_every)
    times = rec_idx * dt
    dist = np.empty((len(seeds), len(rec_idx)))
    pur = np.empty_like(dist)
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        g1 = ginibre_factor(dim, rng)
        g2 = ginibre_factor(dim, rng)
        j = 0
        for step in range(n_steps + 1):
            if step > 0:
                g1 = propagate_factor(g1, u)
                g2 = propagate_factor(g2, u)
            if step % record_every == 0:
                r1 = factor_to_density(g1)
                dist[i, j] = trace_distance(r1, factor_to_density(g2))
                pur[i, j] = purity(r1)
                j += 1
    rec = TrajectoryRecord(times)
    for name, s in (("distance", dist), ("purity", pur)):
        rec.series[name], rec.stderr[name] = _mean_and_stderr(s)
        rec.samples[name] = s
    if model.params.gamma > 0:
        rec.fit = fit_decay_rate(times, rec.series["distance"])
    return rec


def negativity_trajectory(
    model: ReservoirModel,
    t_max: float,
    dt: float,
    seeds,
    record_every: int = 1,
) -> TrajectoryRecord:
    """Log negativity of ``|+>^N`` under the normalised map.

    The state stays pure, so it is evolved as a vector and the negativity
    computed from Schmidt coefficients.  Each seed draws one random half of
    the sites as the transposed subsystem.
    """
    n = model.params.n
    if n % 2:
        raise ValueError("default N/2 bipartition needs even N")
    n_steps = int(round(t_max / dt))
    u = reservoir_propagator(model, dt).matrix
    rec_idx = np.arange(0, n_steps + 1, record_every)
    subsystems = [random_subsystem(n, np.random.default_rng(s)) for s in seeds]
    neg = np.empty((len(subsystems), len(rec_idx)))
    psi = plus_state(n)
    j = 0
    for step in range(n_steps + 1):
        if step > 0:
            psi = propagate_state(psi, u)
        if step % record_every == 0:
            for i, sub in enumerate(subsystems):
                neg[i, j] = pure_state_negativity(psi, sub, n)
            j += 1
    rec = TrajectoryRecord(rec_idx * dt)
    rec.series["negativity"], rec.stderr["negativity"] = _mean_and_stderr(neg)
    rec.samples["negativity"] = neg
    return rec


def reservoir_jump_operators(n: int) -> np.ndarray:
    """Jump operators ``L_l = (1 + s^y_l)/sqrt(2)``.

    ``L^dagger L = 1 + s^y_l``, so ``H - (i gamma/2) sum L^dagger L`` equals the
    reservoir generator up to the constant ``-(i gamma/2) N``, which only
    rescales the norm.
    """
    dim = 2 ** n
    eye = np.eye(dim, dtype=complex)
    return np.stack([(eye + embed_pauli("y", l, n)) / math.sqrt(2.0) for l in range(n)])


def effective_hamiltonian(h: np.ndarray, jumps: np.ndarray, gamma: float) -> np.ndarray:
    """``H - (i gamma / 2) sum_l L_l^dagger L_l``."""
    jtj = np.einsum("lba,lbc->ac", jumps.conj(), jumps)
    return np.asarray(h, dtype=complex) - 0.5j * gamma * jtj


def jump_ensemble(
    rho0: np.ndarray,
    h: np.ndarray,
    jumps: np.ndarray,
    gamma: float,
    dt: float,
    n_steps: int,
    n_traj: int,
    seed=None,
    record_every: int = 1,
    max_step_probability: float = 0.1,
):
    """Batch of first-order quantum-jump trajectories.

    Each step draws a jump on site ``l`` with probability
    ``gamma dt <L_l^dagger L_l>``; otherwise the no-jump Kraus operator
    ``1 - i dt H_eff`` is applied.  The state is renormalised after either
    branch.

    Returns ``(times, states, jump_log)`` with ``states`` of shape
    ``(n_records, n_traj, d, d)`` and ``jump_log`` a list of
    ``(trajectory, site, time)``.
    """
    jumps = np.ascontiguousarray(jumps, dtype=complex)
    d = rho0.shape[0]
    jtj = np.ascontiguousarray(np.einsum("lba,lbc->lac", jumps.conj(), jumps))
    bound = gamma * dt * float(sum(np.linalg.eigvalsh(m).max() for m in jtj))
    if bound >= max_step_probability:
        raise StepSizeError(f"jump probability per step can reach {bound:.3f} >= {max_step_probability}")
    k0 = np.ascontiguousarray(np.eye(d) - 1j * dt * effective_hamiltonian(h, jumps, gamma))
    jump_ops = jumps.copy()
    rng = np.random.default_rng(seed)
    states = np.ascontiguousarray(np.broadcast_to(rho0.astype(complex), (n_traj, d, d)).copy())
    sites = np.empty(n_traj, dtype=np.int64)
    rec_steps = list(range(0, n_steps + 1, record_every))
    out = np.empty((len(rec_steps), n_traj, d, d), dtype=complex)
    out[0] = states
    log = []
    r = 1
    for step in range(1, n_steps + 1):
        kernels.jump_step(states, k0, jump_ops, jtj, gamma * dt, rng.random(n_traj), sites)
        for traj in np.flatnonzero(sites >= 0):
            log.append((int(traj), int(sites[traj]), step * dt))
        if step % record_every == 0:
            out[r] = states
            r += 1
    return np.array(rec_steps) * dt, out, log


def jump_trajectory(
    rho0: np.ndarray,
    model: ReservoirModel,
    dt: float,
    t_max: float,
    seed=None,
    jumps: np.ndarray | None = None,
) -> TrajectoryRecord:
    """Single stochastic trajectory of the reservoir with its jump log."""
    n = model.params.n
    jumps = reservoir_jump_operators(n) if jumps is None else jumps
    n_steps = int(round(t_max / dt))
    times, states, log = jump_ensemble(
        rho0, model.hermitian_part(), jumps, model.params.gamma, dt, n_steps, 1, seed
    )
    rec = TrajectoryRecord(times)
    rec.samples["state"] = states[:, 0]
    rec.series["purity"] = np.array([purity(s) for s in states[:, 0]])
    rec.jumps = [(site, t) for _, site, t in log]
    return rec


def lindblad_generator(h: np.ndarray, jumps: np.ndarray, gamma: float) -> np.ndarray:
    """Row-major vectorised Lindblad superoperator (test oracle for small systems)."""
    d = h.shape[0]
    eye = np.eye(d)
    hc = np.asarray(h, dtype=complex)
    # vec(A X B) = (A kron B^T) vec(X) for row-major flattening
    gen = -1j * (np.kron(hc, eye) - np.kron(eye, hc.T))
    for lop in jumps:
        ltl = lop.conj().T @ lop
        gen += gamma * (np.kron(lop, lop.conj()) - 0.5 * np.kron(ltl, eye) - 0.5 * np.kron(eye, ltl.T))
    return gen


def lindblad_evolve(rho0: np.ndarray, h, jumps, gamma: float, t: float) -> np.ndarray:
    d = rho0.shape[0]
    vec = matrix_exponential(lindblad_generator(h, jumps, gamma), t) @ rho0.reshape(-1)
    return vec.reshape(d, d)
