import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhqrc.dynamics import matrix_exponential, purity, random_mixed_state, reservoir_jump_operators, trace_distance
from nhqrc.emulation import (
    EmulationCollapseError,
    ShiftTooSmallError,
    build_ensemble,
    default_shift,
    emulate_evolution,
    emulate_step,
    emulation_error_scan,
    ensemble_output,
    exact_noclick_step,
    noclick_propagator,
    shift_jump_operator,
)
from nhqrc.operators import PAULI, ModelParams, ReservoirModel

DTS = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]


def reservoir_instance(n=3, seed=0):
    m = ReservoirModel.sample(ModelParams(n=n, k=2, jx=0.8, delta_x=0.4), seed, seed + 1)
    return m.hermitian_part(), reservoir_jump_operators(n)


# --------------------------------------------------------------------------
# shifted operators


def test_shift_of_lowering_operator():
    np.testing.assert_allclose(shift_jump_operator(PAULI["-"], 1.0), np.diag([math.sqrt(2), 1.0]), atol=1e-15)


def test_shift_of_pauli_y():
    np.testing.assert_allclose(shift_jump_operator(PAULI["y"], 0.5), math.sqrt(1.5) * np.eye(2), atol=1e-15)


@given(st.integers(0, 1000), st.floats(0.01, 5))
def test_shift_defining_identity(seed, lam):
    rng = np.random.default_rng(seed)
    l_op = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    lb = shift_jump_operator(l_op, lam)
    np.testing.assert_allclose(lb, lb.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(lb).min() > 0
    np.testing.assert_allclose(lb @ lb, l_op.conj().T @ l_op + lam * np.eye(8), atol=1e-10 * max(1.0, np.abs(lb).max() ** 2))


def test_shift_too_small():
    with pytest.raises(ShiftTooSmallError):
        shift_jump_operator(PAULI["-"], 0.0)
    with pytest.raises(ShiftTooSmallError):
        shift_jump_operator(PAULI["-"], -0.5)


def test_default_shift_is_positive():
    assert default_shift(PAULI["-"]) == pytest.approx(1.1)
    assert default_shift(2 * np.eye(2)) == pytest.approx(5.1)


# --------------------------------------------------------------------------
# ensemble


def test_single_qubit_ensemble_shape():
    ens = build_ensemble(PAULI["x"], PAULI["-"], 0.5, 1e-3)
    assert ens.n_unitaries == 2
    for u in (*ens.u_plus, *ens.u_minus):
        np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-9)


def test_reservoir_ensemble_size():
    h, jumps = reservoir_instance(3)
    ens = build_ensemble(h, jumps, 1.0, 1e-3)
    assert ens.n_unitaries == 6 and ens.shifted.shape == (3, 8, 8)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError, match="Hermitian"):
        build_ensemble(np.array([[0, 1], [0, 0]]), PAULI["-"], 1.0, 1e-3)
    with pytest.raises(ValueError):
        build_ensemble(PAULI["x"], PAULI["-"], 1.0, 0.0)
    with pytest.raises(ValueError):
        build_ensemble(PAULI["x"], np.eye(4), 1.0, 1e-3)


def test_zero_gain_loss_is_exact_unitary():
    h, jumps = reservoir_instance(3)
    dt = 1e-2
    ens = build_ensemble(h, jumps, 0.0, dt)
    rho = random_mixed_state(8, 1)
    u = matrix_exponential(h, -1j * dt)
    out = emulate_step(rho, ens)
    np.testing.assert_allclose(out, u @ rho @ u.conj().T, atol=1e-12)
    assert purity(out) == pytest.approx(purity(rho), abs=1e-12)


def test_trace_bookkeeping():
    h, jumps = reservoir_instance(3)
    gamma, dt = 0.7, 1e-3
    ens = build_ensemble(h, jumps, gamma, dt)
    rho = random_mixed_state(8, 2)
    raw = ensemble_output(rho, ens)
    tr = np.trace(raw).real
    assert tr == pytest.approx(math.exp(-gamma * dt * ens.gamma_rate(rho)), rel=1e-4)
    unnorm = emulate_step(rho, ens, renormalize=False)
    assert np.trace(unnorm).real == pytest.approx(1.0, abs=1e-4)


def test_collapse_detected():
    ens = build_ensemble(PAULI["x"], PAULI["-"], 0.5, 1e-3)
    with pytest.raises(EmulationCollapseError):
        emulate_step(np.zeros((2, 2)), ens)


# --------------------------------------------------------------------------
# accuracy


def test_single_qubit_step_halving():
    rho = random_mixed_state(2, 3)
    errs = []
    for dt in (2e-3, 1e-3):
        ens = build_ensemble(PAULI["x"], PAULI["-"], 1.0, dt)
        errs.append(trace_distance(emulate_step(rho, ens), exact_noclick_step(rho, PAULI["x"], PAULI["-"], 1.0, dt)))
    assert errs[0] / errs[1] >= 3.5


@pytest.mark.parametrize("n_sites", [1, 3])
def test_error_scaling_slope(n_sites):
    if n_sites == 1:
        h, jumps = PAULI["x"], PAULI["-"]
    else:
        h, jumps = reservoir_instance(3)
    scan = emulation_error_scan(h, jumps, 1.0, DTS, random_mixed_state(h.shape[0], 5))
    assert 1.8 <= scan.slope <= 2.2
    assert scan.envelope(1e-3) == pytest.approx(scan.errors[2], rel=0.5)


def test_multi_step_accuracy():
    h, jumps = reservoir_instance(3)
    gamma, dt, steps = 1.0, 1e-3, 1000
    rho0 = random_mixed_state(8, 6)
    ens = build_ensemble(h, jumps, gamma, dt)
    k = noclick_propagator(h, jumps, gamma, dt * steps)
    exact = k @ rho0 @ k.conj().T
    exact /= np.trace(exact).real
    assert trace_distance(emulate_evolution(rho0, ens, steps), exact) <= 1e-3


def test_zero_gain_loss_errors_vanish():
    h, jumps = reservoir_instance(3)
    scan = emulation_error_scan(h, jumps, 0.0, DTS, random_mixed_state(8, 7))
    assert scan.errors.max() <= 1e-12
    assert math.isnan(scan.slope)


def test_error_grows_with_gain_loss():
    h, jumps = reservoir_instance(3)
    rho = random_mixed_state(8, 8)
    errs = [emulation_error_scan(h, jumps, g, [1e-3], rho).errors[0] for g in (0.25, 0.5, 1.0, 2.0)]
    assert all(b > a for a, b in zip(errs, errs[1:]))


def test_shift_choice_only_affects_higher_order():
    h, jumps = reservoir_instance(3)
    rho = random_mixed_state(8, 9)
    dt = 1e-3
    a = emulate_step(rho, build_ensemble(h, jumps, 1.0, dt, shifts=1.1))
    b = emulate_step(rho, build_ensemble(h, jumps, 1.0, dt, shifts=2.0))
    scan = emulation_error_scan(h, jumps, 1.0, DTS, rho, shifts=2.0)
    assert trace_distance(a, b) <= 2 * scan.envelope(dt)


def test_scan_requires_descending_steps():
    with pytest.raises(ValueError, match="descending"):
        emulation_error_scan(PAULI["x"], PAULI["-"], 1.0, [1e-4, 1e-3], np.eye(2) / 2)
