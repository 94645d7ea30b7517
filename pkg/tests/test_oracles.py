import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhqrc.dynamics import matrix_exponential, pure_density, trace_distance
from nhqrc.operators import PAULI
from nhqrc.oracles import (
    cs_factors,
    twolevel_distance,
    twolevel_distance_period,
    twolevel_hamiltonian,
    twolevel_heisenberg_coeffs,
    twolevel_sigma_z,
)

GRID = list(itertools.product(np.linspace(0.1, 2.0, 20), np.linspace(0.0, 2.0, 20), np.linspace(0.05, 3.0, 20)))


def engine_coeffs(h, gamma, t, rotation=None):
    u = matrix_exponential(twolevel_hamiltonian(h, gamma), -1j * t)
    if rotation is not None:
        u = u @ rotation
    sig = u.conj().T @ PAULI["z"] @ u
    proj = lambda p: 0.5 * np.trace(sig @ p)  # noqa: E731
    return (
        np.array([proj(PAULI["z"]), proj(PAULI["y"]), proj(PAULI["x"]), proj(np.eye(2))]),
        np.trace(u @ u.conj().T).real,
    )


def engine_distance(h, gamma, t):
    u = matrix_exponential(twolevel_hamiltonian(h, gamma), -1j * t)
    out = []
    for psi in ([1, 0], [0, 1]):
        r = u @ pure_density(psi) @ u.conj().T
        out.append(r / np.trace(r).real)
    return trace_distance(*out)


def test_coefficients_over_grid():
    worst = 0.0
    for h, g, t in GRID:
        ref, norm = engine_coeffs(h, g, t)
        c = twolevel_heisenberg_coeffs(h, g, t)
        got = np.array([c.a, c.b, c.c, c.d])
        scale = max(1.0, norm)
        worst = max(worst, np.abs(got - ref).max() / scale, abs(c.norm - norm) / scale)
    assert worst < 1e-10


def test_distance_over_grid():
    worst = max(abs(twolevel_distance(h, g, t) - engine_distance(h, g, t)) for h, g, t in GRID)
    assert worst < 1e-10


@given(st.floats(0.1, 2), st.floats(0, 2), st.floats(0.01, 3), st.floats(0, 1), st.floats(0, 0.2))
def test_rotated_coefficients(h, gamma, t, theta, t_prime):
    rot = matrix_exponential(PAULI["x"], -1j * theta * t_prime)
    ref, _ = engine_coeffs(h, gamma, t, rot)
    c = twolevel_sigma_z(h, gamma, t, theta, t_prime)
    scale = max(1.0, c.norm)
    np.testing.assert_allclose([c.a, c.b, c.c, c.d], ref.real, atol=1e-10 * scale)
    np.testing.assert_allclose(c.operator(), rot.conj().T @ engine_coeffs_op(h, gamma, t) @ rot, atol=1e-10 * scale)


def engine_coeffs_op(h, gamma, t):
    u = matrix_exponential(twolevel_hamiltonian(h, gamma), -1j * t)
    return u.conj().T @ PAULI["z"] @ u


@pytest.mark.parametrize("eps", [0.0, 1e-12, 1e-9, -1e-9, 1e-6])
def test_exceptional_point_branch(eps):
    h, t = 1.0, 1.7
    gamma = h + eps
    c, s = cs_factors(h, gamma, t)
    assert np.isfinite(c) and np.isfinite(s)
    ref, norm = engine_coeffs(h, gamma, t)
    co = twolevel_heisenberg_coeffs(h, gamma, t)
    np.testing.assert_allclose([co.a, co.b, co.d], ref[[0, 1, 3]].real, atol=1e-8 * norm)
    assert twolevel_distance(h, gamma, t) == pytest.approx(engine_distance(h, gamma, t), abs=1e-8)


def test_series_and_closed_form_agree_at_switch():
    h, t = 1.0, 1.0
    for x in (0.99e-8, 1.01e-8):
        g = math.sqrt(h * h - x)
        w = math.sqrt(x)
        c, s = cs_factors(h, g, t)
        assert c == pytest.approx(math.cos(w), abs=1e-15)
        assert s == pytest.approx(math.sin(w) / w, abs=1e-15)


def test_distance_periodic_below_threshold():
    h, gamma = 1.0, 0.6
    period = twolevel_distance_period(h, gamma)
    assert period == pytest.approx(math.pi / 1.6)
    for t in np.linspace(0, 3, 7):
        assert twolevel_distance(h, gamma, t + period) == pytest.approx(twolevel_distance(h, gamma, t), abs=1e-12)
    with pytest.raises(ValueError):
        twolevel_distance_period(1.0, 1.0)


def test_distance_limits():
    assert twolevel_distance(1.0, 0.0, 2.3) == 1.0
    assert twolevel_distance(1.0, 0.5, 0.0) == 1.0
    # above the exceptional point both states approach the same pure state
    assert twolevel_distance(1.0, 3.0, 10.0) < 1e-6
