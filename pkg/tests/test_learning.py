import math

import numpy as np
import pytest
import scipy.sparse.linalg
from hypothesis import given
from hypothesis import strategies as st

from nhqrc.learning import (
    DegenerateSeriesWarning,
    NarmaDivergenceError,
    ReservoirConfig,
    feature_labels,
    feature_table,
    linear_memory_task,
    memory_realization,
    narma_target,
    narma_task,
    nrmse,
    pearson_capacity,
    realization_seeds,
    ridge_fit,
    run_reservoir,
    standardize,
)
from nhqrc.operators import ModelParams, ReservoirModel
from nhqrc.spectrum import find_gamma_critical

SMALL = ModelParams(n=4, k=2, jx=1.0, delta_x=0.5)


def small_cfg(**kw):
    base = dict(params=SMALL, washout=300, train=400, test=300)
    base.update(kw)
    return ReservoirConfig(**base)


# --------------------------------------------------------------------------
# configuration and features


def test_config_guards():
    with pytest.raises(ValueError, match="0.2"):
        ReservoirConfig(t_prime=0.3)
    with pytest.raises(ValueError):
        ReservoirConfig(washout=0)
    with pytest.raises(ValueError):
        ReservoirConfig(delta_enc=0.5)
    assert ReservoirConfig().length == 4600


def test_feature_layout():
    table = feature_table(8)
    assert table.shape == (256, 36)
    labels = feature_labels(8)
    assert labels[:2] == ["z0", "z1"] and labels[8] == "z0z1" and labels[-1] == "z6z7"
    # basis state 0 is all up
    np.testing.assert_array_equal(table[0], np.ones(36))


def test_seed_streams_are_reproducible_and_distinct():
    a, b = realization_seeds(5), realization_seeds(5)
    for name in a:
        assert a[name].generate_state(4).tolist() == b[name].generate_state(4).tolist()
    states = {tuple(s.generate_state(4)) for s in a.values()}
    assert len(states) == len(a)


def test_features_ignore_inputs_without_encoding_time():
    cfg = small_cfg(t_prime=0.0, delta_enc=0.0)
    rng = np.random.default_rng(0)
    f1 = run_reservoir(cfg, rng.uniform(0, 1, 50), seed=3)
    f2 = run_reservoir(cfg, rng.uniform(0, 1, 50), seed=3)
    np.testing.assert_allclose(f1, f2, atol=1e-12)


def test_features_bounded_and_shaped():
    cfg = small_cfg(params=SMALL.with_(gamma=0.8))
    f = run_reservoir(cfg, np.random.default_rng(1).uniform(0, 1, 200), seed=2)
    assert f.shape == (200, 10)
    assert np.all(np.abs(f) <= 1 + 1e-12)


def test_inputs_outside_range_rejected():
    with pytest.raises(ValueError, match="range"):
        run_reservoir(small_cfg(), np.array([0.5, 1.5]), seed=0)


def test_echo_state_above_threshold():
    m = ReservoirModel.sample(SMALL, 1, 2)
    gc = find_gamma_critical(m).gamma_c
    cfg_broken = small_cfg(params=SMALL.with_(gamma=gc + 1.0))
    cfg_unitary = small_cfg(params=SMALL)
    theta = np.random.default_rng(0).uniform(0, 1, 400)
    rng = np.random.default_rng(9)
    g1 = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    g2 = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    seeds = realization_seeds(4)
    for cfg, fading in ((cfg_broken, True), (cfg_unitary, False)):
        model = ReservoirModel.sample(cfg.params, 1, 2)
        a = run_reservoir(cfg, theta, seeds, model=model, initial_factor=g1)
        b = run_reservoir(cfg, theta, seeds, model=model, initial_factor=g2)
        gap = np.abs(a[-50:] - b[-50:]).max()
        assert (gap < 1e-8) if fading else (gap > 1e-3)


# --------------------------------------------------------------------------
# readout


def test_standardize_properties(rng):
    x = rng.normal(3.0, 2.0, size=(200, 5))
    x[:, 2] = 7.0
    xs, _, stats = standardize(x)
    assert stats.dropped == [2]
    assert xs.shape == (200, 4)
    np.testing.assert_allclose(xs.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(xs.std(axis=0), 1, atol=1e-12)
    again, _, _ = standardize(xs)
    np.testing.assert_allclose(again, xs, atol=1e-12)


def test_standardize_uses_training_statistics(rng):
    tr, te = rng.normal(size=(50, 3)), rng.normal(5, 1, size=(20, 3))
    _, te_s, stats = standardize(tr, te)
    np.testing.assert_allclose(te_s, (te - tr.mean(0)) / tr.std(0))


def test_ridge_recovers_exact_weights(rng):
    x = rng.normal(size=(200, 6))
    w0 = rng.normal(size=6)
    model = ridge_fit(x, x @ w0 + 2.5, 1e-12)
    np.testing.assert_allclose(model.weights, w0, atol=1e-6)
    np.testing.assert_allclose(model.predict(x), x @ w0 + 2.5, atol=1e-6)


def test_ridge_shrinks_with_large_penalty(rng):
    x = rng.normal(size=(100, 4))
    y = rng.normal(size=100)
    model = ridge_fit(x, y, 1e9)
    assert np.abs(model.weights).max() < 1e-6
    np.testing.assert_allclose(model.predict(x), y.mean(), atol=1e-5)


def test_ridge_matches_conjugate_gradient(rng):
    x = rng.normal(size=(50, 10))
    y = rng.normal(size=50)
    lam = 0.3
    xc = x - x.mean(0)
    a = xc.T @ xc + lam * np.eye(10)
    w_cg, info = scipy.sparse.linalg.cg(a, xc.T @ (y - y.mean()), rtol=1e-14, atol=0, maxiter=1000)
    assert info == 0
    np.testing.assert_allclose(ridge_fit(x, y, lam).weights, w_cg, atol=1e-8)


def test_ridge_singular_without_penalty():
    x = np.ones((10, 3))
    with pytest.raises(np.linalg.LinAlgError, match="lam > 0"):
        ridge_fit(x, np.arange(10.0), 0.0)


def test_ridge_ignores_test_stage_order():
    cfg = small_cfg(params=SMALL.with_(gamma=1.5))
    theta = np.random.default_rng(0).uniform(0, 1, cfg.length)
    feats = run_reservoir(cfg, theta, seed=1)
    tr = slice(cfg.washout, cfg.washout + cfg.train)
    target = np.roll(theta, 1)
    perm = feats.copy()
    test = perm[cfg.washout + cfg.train:]
    perm[cfg.washout + cfg.train:] = test[np.random.default_rng(2).permutation(len(test))]
    xa, _, sa = standardize(feats[tr], feats[cfg.washout + cfg.train:])
    xb, _, sb = standardize(perm[tr], perm[cfg.washout + cfg.train:])
    ma, mb = ridge_fit(xa, target[tr], 1e-3, sa), ridge_fit(xb, target[tr], 1e-3, sb)
    assert np.array_equal(ma.weights, mb.weights) and np.array_equal(ma.intercept, mb.intercept)


# --------------------------------------------------------------------------
# metrics


@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-10, 10))
def test_capacity_is_affine_invariant(seed, scale, shift):
    y = np.random.default_rng(seed).normal(size=50)
    assert pearson_capacity(y, y) == pytest.approx(1.0)
    assert pearson_capacity(y, scale * y + shift) == pytest.approx(1.0)
    assert pearson_capacity(y, -scale * y) == pytest.approx(1.0)


def test_capacity_null_distribution():
    small = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        small += pearson_capacity(rng.normal(size=1300), rng.normal(size=1300)) < 0.01
    assert small >= 0.99 * 200


def test_capacity_degenerate_warns():
    with pytest.warns(DegenerateSeriesWarning):
        assert pearson_capacity(np.arange(5.0), np.ones(5)) == 0.0


def test_nrmse_values():
    y = np.random.default_rng(0).normal(size=100)
    assert nrmse(y, y) == 0.0
    assert nrmse(y, np.full_like(y, y.mean())) == pytest.approx(1.0, abs=1e-14)
    assert nrmse(np.array([0.0, 1.0]), np.array([1.0, 1.0])) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        nrmse(np.ones(3), np.zeros(3))


# --------------------------------------------------------------------------
# NARMA


def test_narma_start_and_fixed_point():
    y = narma_target(np.zeros(500), 3)
    assert y[0] == 0.1
    fixed = (0.7 - math.sqrt(0.49 - 0.06)) / 0.3  # root of 0.15 y^2 - 0.7 y + 0.1
    assert y[-1] == pytest.approx(fixed, abs=1e-12)
    assert fixed == pytest.approx(0.1475, abs=1e-4)


def test_narma_hand_computed_prefix():
    theta = np.array([0.1, 0.2, 0.15, 0.05])
    y = narma_target(theta, 2)
    ref = [0.1]
    ref.append(0.3 * 0.1 + 0.05 * 0.1 * 0.1 + 0.1)
    ref.append(0.3 * ref[1] + 0.05 * ref[1] * (ref[1] + ref[0]) + 1.5 * 0.1 * 0.2 + 0.1)
    ref.append(0.3 * ref[2] + 0.05 * ref[2] * (ref[2] + ref[1]) + 1.5 * 0.2 * 0.15 + 0.1)
    np.testing.assert_allclose(y, ref, rtol=1e-15)


def test_narma_bounded_for_admissible_inputs():
    theta = np.random.default_rng(0).uniform(0, 0.2, 10_000)
    y = narma_target(theta, 10)
    assert np.all((y > 0) & (y < 1))


def test_narma_divergence():
    with pytest.raises(NarmaDivergenceError):
        narma_target(np.ones(200), 10)


# --------------------------------------------------------------------------
# tasks


def test_memory_realization_is_deterministic():
    cfg = small_cfg(params=SMALL.with_(gamma=1.0))
    a = memory_realization(cfg, 5, 1e-3, 7)
    b = memory_realization(cfg, 5, 1e-3, 7)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[2], b[2])


def test_memory_capacity_profile():
    cfg = small_cfg(params=SMALL.with_(gamma=1.0))
    res = linear_memory_task(cfg, 20, None, [0, 1], workers=1)
    caps = res.capacities
    assert caps[0] > 0.5
    assert caps[-5:].max() < 0.05
    assert 0 <= res.total_norm <= 1
    assert res.per_realization["capacities"].shape == (2, 20)


def test_shuffled_targets_destroy_capacity():
    cfg = small_cfg(params=SMALL.with_(gamma=1.0))
    res = linear_memory_task(cfg, 3, None, [0, 1], workers=1, shuffle_test=True)
    assert res.capacities.max() < 0.02


def test_penalty_changes_readout_only_mildly():
    cfg = small_cfg(params=SMALL.with_(gamma=1.0))
    lo = memory_realization(cfg, 3, 1e-6, 3)[0]
    hi = memory_realization(cfg, 3, 1e-1, 3)[0]
    np.testing.assert_allclose(lo, hi, atol=0.05)


def test_narma_task_range_and_result():
    cfg = small_cfg(params=SMALL.with_(gamma=1.0), input_high=0.2)
    res = narma_task(cfg, 3, None, [0], workers=1)
    assert 0 < res.nrmse[0] < 1
    with pytest.raises(ValueError, match="0.2"):
        narma_task(small_cfg(), 3, None, [0])
