"""Closed-form results for a single spin under ``H = h s^x + i gamma s^y``.

These serve as independent references for the generic matrix-exponential
engine.  Near the exceptional point ``gamma = h`` the frequency
``omega = sqrt(h^2 - gamma^2)`` vanishes; all formulas are written in terms
of ``c = cos(omega t)`` and ``s = sin(omega t)/omega``, which are analytic in
``omega^2`` and switch to a Taylor series when ``|omega| t`` is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_THRESHOLD = 1e-4


def cs_factors(h: float, gamma: float, t: float) -> tuple[float, float]:
    """``(c, s)`` with ``c = cos(w t)``, ``s = sin(w t)/w`` and ``w^2 = h^2 - gamma^2``.

    Above the exceptional point (``w^2 < 0``) these become ``cosh(k t)`` and
    ``sinh(k t)/k`` with ``k = sqrt(gamma^2 - h^2)``.
    """
    w2 = h * h - gamma * gamma
    x = w2 * t * t  # (w t)^2, signed
    if abs(x) < SERIES_THRESHOLD ** 2:
        # cos and sinc series in x = (wt)^2; truncation error ~ x^3 / 720
        c = 1.0 - x / 2.0 + x * x / 24.0
        s = t * (1.0 - x / 6.0 + x * x / 120.0)
        return c, s
    if w2 > 0:
        w = math.sqrt(w2)
        return math.cos(w * t), math.sin(w * t) / w
    k = math.sqrt(-w2)
    return math.cosh(k * t), math.sinh(k * t) / k


@dataclass(frozen=True)
class HeisenbergCoefficients:
    """``Sigma^z(t) = A s^z + B s^y + C s^x + D 1`` and ``Tr[U U^dagger]``."""

    a: float
    b: float
    c: float
    d: float
    norm: float

    def operator(self) -> np.ndarray:
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
        sz = np.diag([1.0 + 0j, -1.0])
        return self.a * sz + self.b * sy + self.c * sx + self.d * np.eye(2)


def twolevel_heisenberg_coeffs(h: float, gamma: float, t: float) -> HeisenbergCoefficients:
    """Unnormalised Heisenberg-picture ``s^z`` after time ``t`` (no input rotation)."""
    c, s = cs_factors(h, gamma, t)
    return HeisenbergCoefficients(
        a=c * c - s * s * (gamma * gamma + h * h),
        b=2.0 * h * c * s,
        c=0.0,
        d=2.0 * h * gamma * s * s,
        norm=2.0 * c * c + 2.0 * s * s * (h * h + gamma * gamma),
    )


def twolevel_sigma_z(h: float, gamma: float, t: float, theta: float, t_prime: float) -> HeisenbergCoefficients:
    """``U^dagger s^z U`` for ``U = exp(-i t H) exp(-i theta t' s^x)``, unnormalised.

    The rotation by ``Theta = theta t'`` mixes ``s^z`` and ``s^y``:
    ``A [cos 2Theta s^z + sin 2Theta s^y] + B [cos 2Theta s^y - sin 2Theta s^z] + D``.
    """
    base = twolevel_heisenberg_coeffs(h, gamma, t)
    two = 2.0 * theta * t_prime
    cs, sn = math.cos(two), math.sin(two)
    return HeisenbergCoefficients(
        a=base.a * cs - base.b * sn,
        b=base.a * sn + base.b * cs,
        c=0.0,
        d=base.d,
        norm=base.norm,
    )


def twolevel_distance(h: float, gamma: float, t: float) -> float:
    """Trace distance between the evolved, normalised ``|up>`` and ``|down>``.

    ``D(t) = [1 + gamma^2 sin^2(2 w t) / w^2]^(-1/2)``, written as
    ``[1 + 4 gamma^2 c^2 s^2]^(-1/2)`` so it stays finite at ``w = 0``.
    """
    c, s = cs_factors(h, gamma, t)
    return 1.0 / math.sqrt(1.0 + 4.0 * gamma * gamma * c * c * s * s)


def twolevel_distance_period(h: float, gamma: float) -> float:
    """Oscillation period ``pi / (2 w)`` of :func:`twolevel_distance` below the exceptional point."""
    w2 = h * h - gamma * gamma
    if w2 <= 0:
        raise ValueError("no oscillation at or above the exceptional point")
    return math.pi / (2.0 * math.sqrt(w2))


def twolevel_hamiltonian(h: float, gamma: float) -> np.ndarray:
    """``h s^x + i gamma s^y`` as a real 2x2 matrix."""
    return np.array([[0.0, h + gamma], [h - gamma, 0.0]])
