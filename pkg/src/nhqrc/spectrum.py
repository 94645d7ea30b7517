"""Biorthogonal diagonalisation and the real-to-complex spectral transition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .operators import ReservoirModel, embed_pauli

COMPLEX_RTOL = 1e-8
MAX_CONDITION = 1e8


@dataclass
class Spectrum:
    """Eigen-data of a non-Hermitian matrix.

    ``right_vectors`` holds |R_j> as columns and ``left_vectors`` holds <L_j|
    as rows, normalised so that ``left_vectors @ right_vectors = I``.  When
    the matrix is (numerically) defective the biorthonormal pair is not
    available: ``defective`` is set and ``left_vectors`` is ``None``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray | None
    tol: float
    defective: bool = False
    condition: float = 1.0

    @property
    def lambda_im(self) -> float:
        return max_imag(self)

    @property
    def n_complex(self) -> int:
        return count_complex(self, self.tol)

    def reconstruct(self) -> np.ndarray:
        if self.left_vectors is None:
            raise ValueError("biorthonormal basis unavailable for a defective spectrum")
        return (self.right_vectors * self.eigenvalues) @ self.left_vectors


def complex_tolerance(h: np.ndarray) -> float:
    """Threshold on |Im E| separating PT breaking from round-off."""
    return COMPLEX_RTOL * max(1.0, float(np.linalg.norm(h)))


def _left_from_adjoint(h, evals, tol):
    # eigenvectors of H^dagger belong to conj(E); pair them greedily by distance
    mu, w = np.linalg.eig(h.conj().T)
    target = np.conj(mu)
    left = np.empty((len(evals), h.shape[0]), dtype=complex)
    used = np.zeros(len(mu), dtype=bool)
    for j, e in enumerate(evals):
        d = np.abs(target - e)
        d[used] = np.inf
        i = int(np.argmin(d))
        used[i] = True
        left[j] = w[:, i].conj()
    return left


def diagonalize(h: np.ndarray, tol: float | None = None) -> Spectrum:
    """General eigendecomposition with biorthonormal left/right vectors."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("diagonalize needs a square matrix")
    if tol is None:
        tol = complex_tolerance(h)
    if tol <= 0:
        raise ValueError("tol must be positive")
    evals, right = np.linalg.eig(h)
    right = right.astype(complex)
    cond = np.linalg.cond(right)
    if np.isfinite(cond) and cond < MAX_CONDITION:
        left = np.linalg.inv(right)
        return Spectrum(evals, right, left, tol, defective=False, condition=float(cond))

    left = _left_from_adjoint(h, evals, tol)
    overlaps = np.einsum("ji,ij->j", left, right)
    if np.min(np.abs(overlaps)) < np.sqrt(np.finfo(float).eps):
        return Spectrum(evals, right, None, tol, defective=True, condition=float(cond))
    left = left / overlaps[:, None]
    err = np.abs(left @ right - np.eye(len(evals))).max()
    if err > 1e-6:
        return Spectrum(evals, right, None, tol, defective=True, condition=float(cond))
    return Spectrum(evals, right, left, tol, defective=False, condition=float(cond))


def count_complex(s, tol: float | None = None) -> int:
    """Number of eigenvalues with ``|Im E| > tol``.

    Accepts a :class:`Spectrum` or a bare array of eigenvalues.
    """
    evals = s.eigenvalues if isinstance(s, Spectrum) else np.asarray(s)
    if tol is None:
        tol = s.tol if isinstance(s, Spectrum) else COMPLEX_RTOL
    return int(np.count_nonzero(np.abs(evals.imag) > tol))


def max_imag(s) -> float:
    evals = s.eigenvalues if isinstance(s, Spectrum) else np.asarray(s)
    return float(np.max(np.abs(evals.imag))) if len(evals) else 0.0


def conjugate_pairs_ok(evals: np.ndarray, tol: float) -> bool:
    """Every eigenvalue with Im E > tol has a partner within tol of its conjugate."""
    evals = np.asarray(evals)
    for e in evals[evals.imag > tol]:
        if np.min(np.abs(evals - np.conj(e))) > tol:
            return False
    return True


def gamma_critical_prediction(h_x: float, eps_x) -> float:
    """Single-site estimate ``min_l 2|h^x + eps^x_l|`` of the first exceptional point."""
    return float(np.min(2.0 * np.abs(h_x + np.asarray(eps_x, dtype=float))))


@dataclass
class GammaCriticalResult:
    gamma_c: float
    prediction: float
    resolved: bool
    status: str = "ok"  # ok | complex_at_start | no_transition
    bracket: tuple[float, float] = (math.nan, math.nan)
    n_evals: int = 0


def _n_complex_at(h0, direction, gamma):
    h = h0 + gamma * direction
    return count_complex(np.linalg.eigvals(h), complex_tolerance(h))


def find_gamma_critical(
    model: ReservoirModel,
    gamma_range: tuple[float, float] = (0.0, 4.0),
    tol: float = 1e-3,
    scan_step: float = 0.05,
) -> GammaCriticalResult:
    """Smallest gamma at which a complex-conjugate pair appears.

    A coarse scan with spacing ``scan_step`` locates the first gamma with a
    nonzero complex count; bisection then shrinks that bracket to ``tol``.
    """
    lo, hi = map(float, gamma_range)
    h0 = model.hamiltonian(0.0)
    direction = model.hamiltonian(1.0) - h0
    prediction = model.gamma_critical_prediction()
    n_evals = 1
    if _n_complex_at(h0, direction, lo) > 0:
        return GammaCriticalResult(lo, prediction, False, "complex_at_start", (lo, lo), n_evals)

    prev = lo
    found = None
    steps = max(1, int(math.ceil((hi - lo) / scan_step)))
    for i in range(1, steps + 1):
        g = min(hi, lo + i * scan_step)
        n_evals += 1
        if _n_complex_at(h0, direction, g) > 0:
            found = g
            break
        prev = g
    if found is None:
        return GammaCriticalResult(hi, prediction, False, "no_transition", (lo, hi), n_evals)

    a, b = prev, found
    while b - a > tol:
        mid = 0.5 * (a + b)
        n_evals += 1
        if _n_complex_at(h0, direction, mid) > 0:
            b = mid
        else:
            a = mid
    return GammaCriticalResult(b, prediction, True, "ok", (a, b), n_evals)


def spectral_scan(model: ReservoirModel, gammas) -> list[tuple[float, int, float]]:
    """Rows ``(gamma, n_complex, lambda_im)`` over a gamma grid."""
    rows = []
    for g in gammas:
        h = model.hamiltonian(g)
        evals = np.linalg.eigvals(h)
        rows.append((float(g), count_complex(evals, complex_tolerance(h)), max_imag(evals)))
    return rows


@dataclass
class RealityCheck:
    kind: str  # real | exceptional | complex
    product: float
    theta: float | None
    eigenvalues: np.ndarray
    similarity_residual: float | None


def real_spectrum_condition(f_plus: float, f_minus: float, h_z: float | None = None, n_sites: int = 1) -> RealityCheck:
    """Classify ``V = sum_l f+ s^+_l + f- s^-_l (+ h_z s^z_l)`` by the sign of f+ f-.

    For a positive product the operator is similar to a Hermitian one,
    ``V = sqrt(f+ f-) S (sum_l s^x_l) S^-1 (+ h_z sum s^z)`` with
    ``S = exp(theta sum_l s^z_l)`` and ``theta = (ln|f+| - ln|f-|)/4``; the
    residual of that identity is returned.  With ``h_z`` set, a positive
    product still guarantees a real spectrum but a negative one no longer
    forces a complex one.
    """
    if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
        raise ValueError("amplitudes must be finite")
    prod = f_plus * f_minus
    kind = "real" if prod > 0 else ("exceptional" if prod == 0 else "complex")
    dim = 2 ** n_sites
    v = np.zeros((dim, dim), dtype=complex)
    zsum = np.zeros((dim, dim), dtype=complex)
    xsum = np.zeros((dim, dim), dtype=complex)
    for l in range(n_sites):
        v += f_plus * embed_pauli("+", l, n_sites) + f_minus * embed_pauli("-", l, n_sites)
        zsum += embed_pauli("z", l, n_sites)
        xsum += embed_pauli("x", l, n_sites)
    if h_z:
        v += h_z * zsum
    evals = np.linalg.eigvals(v)
    theta = residual = None
    if prod > 0:
        theta = 0.25 * (math.log(abs(f_plus)) - math.log(abs(f_minus)))
        s = scipy.linalg.expm(theta * zsum)
        s_inv = scipy.linalg.expm(-theta * zsum)
        rebuilt = math.copysign(math.sqrt(prod), f_plus) * s @ xsum @ s_inv
        if h_z:
            rebuilt = rebuilt + h_z * zsum
        residual = float(np.abs(rebuilt - v).max())
    return RealityCheck(kind, prod, theta, evals, residual)


def single_site_eigenvalues(h_x: float, gamma: float) -> np.ndarray:
    """Closed form ``+-sqrt(h^2 - gamma^2/4)`` for one spin of the reservoir model."""
    return np.array([1, -1]) * np.sqrt(complex(h_x ** 2 - gamma ** 2 / 4))
