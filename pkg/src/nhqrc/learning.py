"""Quantum reservoir computing pipeline: encoding cycles, z-basis features,
standardisation, ridge readout, memory and NARMA benchmarks."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .dynamics import ginibre_factor, reservoir_propagator
from .operators import MAX_ENCODING_ERROR, ModelParams, ReservoirModel, z_sign_table

NARMA_BOUND = 10.0
NARMA_INPUT_HIGH = 0.2


class DegenerateSeriesWarning(RuntimeWarning):
    pass


class NarmaDivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ReservoirConfig:
    params: ModelParams = field(default_factory=ModelParams)
    t_res: float = 0.4
    t_prime: float = 0.1
    delta_enc: float = 0.01
    washout: int = 2000
    train: int = 1300
    test: int = 1300
    input_low: float = 0.0
    input_high: float = 1.0
    lam: float = 1e-3
    # singular values of the state factor below rank_tol * max are dropped
    rank_tol: float = 1e-12
    rank_check_every: int = 100

    def __post_init__(self):
        if min(self.washout, self.train, self.test) < 1:
            raise ValueError("stage lengths must be >= 1")
        theta_max = max(abs(self.input_low), abs(self.input_high))
        if theta_max * self.t_prime > 0.2:
            raise ValueError(f"theta_max * t_prime = {theta_max * self.t_prime:.3g} exceeds 0.2")
        if not 0 <= self.delta_enc <= MAX_ENCODING_ERROR:
            raise ValueError(f"delta_enc must lie in [0, {MAX_ENCODING_ERROR}]")
        if self.t_res < 0 or self.t_prime < 0:
            raise ValueError("evolution times must be non-negative")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")

    @property
    def length(self) -> int:
        return self.washout + self.train + self.test

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        return d


def feature_table(n: int) -> np.ndarray:
    """Basis-state values of the features: ``z_l`` then ``z_l z_m`` (l < m)."""
    z = z_sign_table(n)
    cols = [z[:, l] for l in range(n)]
    cols += [z[:, l] * z[:, m] for l in range(n) for m in range(l + 1, n)]
    return np.stack(cols, axis=1)


def feature_labels(n: int) -> list[str]:
    labels = [f"z{l}" for l in range(n)]
    labels += [f"z{l}z{m}" for l in range(n) for m in range(l + 1, n)]
    return labels


SEED_STREAMS = ("graph", "disorder", "state", "inputs", "encoding", "shuffle")


def child_seed(ss: np.random.SeedSequence, index: int) -> np.random.SeedSequence:
    """Stateless equivalent of ``ss.spawn``: the same index always gives the same child."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (index,), pool_size=ss.pool_size)


def realization_seeds(seed) -> dict[str, np.random.SeedSequence]:
    """Independent seed streams for one realization.

    ``seed`` may be an int, a SeedSequence or an already split dict.
    """
    if isinstance(seed, dict):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: child_seed(ss, i) for i, name in enumerate(SEED_STREAMS)}


def _truncate(g: np.ndarray, tol: float) -> np.ndarray:
    u, s, _ = np.linalg.svd(g, full_matrices=False)
    keep = s > tol * s[0]
    if keep.all():
        return g
    return np.ascontiguousarray(u[:, keep] * s[keep])


def run_reservoir(
    cfg: ReservoirConfig,
    inputs,
    seed=None,
    model: ReservoirModel | None = None,
    initial_factor: np.ndarray | None = None,
) -> np.ndarray:
    """Feature matrix of the driven reservoir, one row per input.

    Each cycle applies ``exp(-i t' sum_l (theta_n + delta_ln) s^x_l)``, then
    ``exp(-i t_res H_res)``, renormalises, and records ``<z_l>`` and
    ``<z_l z_m>``.  The state starts as a Ginibre random mixed state unless
    ``initial_factor`` (``rho = G G^dagger``) is supplied.
    """
    inputs = np.asarray(inputs, dtype=float)
    lo, hi = min(cfg.input_low, cfg.input_high), max(cfg.input_low, cfg.input_high)
    if inputs.size and (inputs.min() < lo - 1e-12 or inputs.max() > hi + 1e-12):
        raise ValueError(f"inputs outside configured range [{lo}, {hi}]")
    seeds = realization_seeds(seed)
    if model is None:
        model = ReservoirModel.sample(cfg.params, seeds["graph"], seeds["disorder"])
    n = model.params.n
    dim = 2 ** n
    u_res = np.ascontiguousarray(reservoir_propagator(model, cfg.t_res).matrix)
    if initial_factor is None:
        g = ginibre_factor(dim, np.random.default_rng(seeds["state"]))
    else:
        g = np.array(initial_factor, dtype=complex, order="C")
        g /= np.linalg.norm(g)
    table = feature_table(n)
    deltas = np.random.default_rng(seeds["encoding"]).uniform(-cfg.delta_enc, cfg.delta_enc, size=(len(inputs), n))
    angles = cfg.t_prime * (inputs[:, None] + deltas)
    feats = np.empty((len(inputs), table.shape[1]))
    for step in range(len(inputs)):
        kernels.apply_x_rotations(g, angles[step])
        g = u_res @ g
        nrm = np.linalg.norm(g)
        if not nrm > 1e-140:
            from .dynamics import NormalizationError

            raise NormalizationError(nrm ** 2)
        g /= nrm
        feats[step] = kernels.row_weights(g) @ table
        if cfg.rank_tol > 0 and (step + 1) % cfg.rank_check_every == 0 and g.shape[1] > 1:
            g = _truncate(g, cfg.rank_tol)
    return feats


# --------------------------------------------------------------------------
# readout

@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray  # boolean mask over original columns
    dropped: list[int]


def standardize(train: np.ndarray, test: np.ndarray | None = None, min_std: float = 1e-12):
    """Column-wise z-scoring with training statistics.

    Zero-variance training columns are removed from both sets.
    Returns ``(train_std, test_std, stats)``.
    """
    train = np.asarray(train, dtype=float)
    if train.shape[0] == 0:
        raise ValueError("empty training set")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    kept = std > min_std * np.maximum(1.0, np.abs(mean))
    if not kept.any():
        raise ValueError("all feature columns have zero variance")
    stats = StandardizationStats(mean, std, kept, [int(i) for i in np.flatnonzero(~kept)])
    return apply_standardization(train, stats), (None if test is None else apply_standardization(test, stats)), stats


def apply_standardization(x: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x[:, stats.kept] - stats.mean[stats.kept]) / stats.std[stats.kept]


@dataclass
class RidgeModel:
    weights: np.ndarray  # (features,) or (features, targets)
    intercept: np.ndarray | float
    lam: float
    stats: StandardizationStats | None = None

    def predict(self, x: np.ndarray, raw: bool = False) -> np.ndarray:
        """Predictions for already standardised ``x`` (or raw features with ``raw=True``)."""
        if raw:
            if self.stats is None:
                raise ValueError("model has no standardisation statistics")
            x = apply_standardization(x, self.stats)
        return x @ self.weights + self.intercept


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float, stats: StandardizationStats | None = None) -> RidgeModel:
    """Closed-form ridge solution on centred targets.

    Solves ``(Xc^T Xc + lam I) w = Xc^T (y - mean(y))`` by Cholesky, with
    ``Xc`` the column-centred features, so the intercept is not penalised.
    ``y`` may hold several targets as columns.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} rows of features but {y.shape[0]} targets")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    a = xc.T @ xc + lam * np.eye(x.shape[1])
    b = xc.T @ (y - y_mean)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
        w = scipy.linalg.cho_solve(factor, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"normal equations are singular at lam={lam}; use lam > 0"
        ) from exc
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError(f"non-finite ridge weights at lam={lam}; use lam > 0")
    return RidgeModel(w, y_mean - x_mean @ w, lam, stats)


# --------------------------------------------------------------------------
# metrics

def pearson_capacity(y, y_hat) -> float:
    """Squared Pearson correlation ``cov^2 / (var y var y_hat)``.

    A constant series gives 0 and a :class:`DegenerateSeriesWarning`.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.size < 2:
        raise ValueError("need two series of equal length >= 2")
    dy = y - y.mean()
    dh = y_hat - y_hat.mean()
    vy = float(dy @ dy)
    vh = float(dh @ dh)
    if vy == 0.0 or vh == 0.0:
        warnings.warn("zero-variance series; capacity set to 0", DegenerateSeriesWarning, stacklevel=2)
        return 0.0
    c = float(dy @ dh) ** 2 / (vy * vh)
    return min(1.0, max(0.0, c))


def nrmse(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError("series lengths differ")
    var = float(y.var())
    if var == 0.0:
        raise ValueError("target series has zero variance")
    return math.sqrt(float(((y - y_hat) ** 2).sum()) / (len(y) * var))


# --------------------------------------------------------------------------
# tasks

def narma_target(inputs, tau_max: int) -> np.ndarray:
    """NARMA series driven by ``inputs`` with zero-initialised history.

    ``y_n = 0.3 y_{n-1} + 0.05 y_{n-1} sum_{tau=1}^{tau_max} y_{n-tau}
    + 1.5 theta_{n-tau_max} theta_{n-1} + 0.1``; indices before the start
    of the series read as zero.  Output index ``n`` runs from 0, so ``y[0]``
    uses only zero history and equals 0.1.
    """
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    theta = np.asarray(inputs, dtype=float)
    n_total = len(theta)
    y = np.zeros(n_total)
    hist = np.zeros(tau_max)  # hist[j] = y_{n-1-j}
    for n in range(n_total):
        y_prev = hist[0]
        th_1 = theta[n - 1] if n >= 1 else 0.0
        th_t = theta[n - tau_max] if n >= tau_max else 0.0
        val = 0.3 * y_prev + 0.05 * y_prev * hist.sum() + 1.5 * th_t * th_1 + 0.1
        if not abs(val) < NARMA_BOUND:
            raise NarmaDivergenceError(f"NARMA series left [-{NARMA_BOUND}, {NARMA_BOUND}] at step {n}")
        y[n] = val
        hist = np.roll(hist, 1)
        hist[0] = val
    return y


@dataclass
class TaskResult:
    """Ensemble-averaged benchmark metrics.

    ``capacities`` holds one entry per delay (memory task) or a single
    entry (NARMA).  Per-realization values are kept in ``per_realization``.
    """

    capacities: np.ndarray
    capacities_stderr: np.ndarray
    total: float
    total_norm: float
    total_norm_stderr: float
    nrmse: np.ndarray
    nrmse_stderr: np.ndarray
    n_realizations: int
    per_realization: dict[str, np.ndarray] = field(default_factory=dict)
    predictions: np.ndarray | None = None
    targets: np.ndarray | None = None
    dropped_features: list[list[int]] = field(default_factory=list)


def _stages(cfg: ReservoirConfig):
    w, tr = cfg.washout, cfg.train
    return slice(w, w + tr), slice(w + tr, w + tr + cfg.test)


def _fit_and_score(features, targets, cfg: ReservoirConfig, lam: float, shuffle_rng=None):
    train, test = _stages(cfg)
    x_tr, x_te, stats = standardize(features[train], features[test])
    model = ridge_fit(x_tr, targets[train], lam, stats)
    pred = model.predict(x_te)
    y_te = targets[test]
    if shuffle_rng is not None:
        y_te = y_te[shuffle_rng.permutation(len(y_te))]
    if pred.ndim == 1:
        pred, y_te = pred[:, None], y_te[:, None]
    caps = np.array([pearson_capacity(y_te[:, j], pred[:, j]) for j in range(pred.shape[1])])
    errs = np.array([nrmse(y_te[:, j], pred[:, j]) for j in range(pred.shape[1])])
    return caps, errs, pred, y_te, stats


def memory_realization(cfg: ReservoirConfig, tau_max: int, lam: float, seed, shuffle_test: bool = False):
    """Delay capacities ``C_tau`` (tau = 1..tau_max) and NRMSE for one realization."""
    seeds = realization_seeds(seed)
    theta = np.random.default_rng(seeds["inputs"]).uniform(cfg.input_low, cfg.input_high, cfg.length)
    feats = run_reservoir(cfg, theta, seeds)
    taus = np.arange(1, tau_max + 1)
    targets = np.zeros((cfg.length, tau_max))
    for j, tau in enumerate(taus):
        targets[tau:, j] = theta[:-tau]
    rng = np.random.default_rng(seeds["shuffle"]) if shuffle_test else None
    return _fit_and_score(feats, targets, cfg, lam, rng)


def narma_realization(cfg: ReservoirConfig, tau_max: int, lam: float, seed):
    seeds = realization_seeds(seed)
    theta = np.random.default_rng(seeds["inputs"]).uniform(cfg.input_low, cfg.input_high, cfg.length)
    y = narma_target(theta, tau_max)
    feats = run_reservoir(cfg, theta, seeds)
    # washout must cover the tau_max steps with undefined history
    if cfg.washout < tau_max:
        raise ValueError("washout shorter than NARMA history")
    return _fit_and_score(feats, y, cfg, lam)


def _aggregate(caps, errs, norm_by, preds, targets, dropped) -> TaskResult:
    caps = np.asarray(caps)
    errs = np.asarray(errs)
    r = caps.shape[0]
    se = (lambda a: a.std(axis=0, ddof=1) / math.sqrt(r)) if r > 1 else (lambda a: np.zeros(a.shape[1:]))
    totals = caps.sum(axis=1)
    norm = totals / norm_by
    return TaskResult(
        capacities=caps.mean(axis=0),
        capacities_stderr=se(caps),
        total=float(totals.mean()),
        total_norm=float(norm.mean()),
        total_norm_stderr=float(norm.std(ddof=1) / math.sqrt(r)) if r > 1 else 0.0,
        nrmse=errs.mean(axis=0),
        nrmse_stderr=se(errs),
        n_realizations=r,
        per_realization={"capacities": caps, "nrmse": errs, "total": totals, "total_norm": norm},
        predictions=preds,
        targets=targets,
        dropped_features=dropped,
    )


def _map(fn, items, workers=None):
    from .parallel import ordered_map

    return ordered_map(fn, items, workers)


def linear_memory_task(cfg: ReservoirConfig, tau_max: int, lam: float | None, seeds, workers=None, shuffle_test=False) -> TaskResult:
    """Delayed-recall benchmark averaged over realizations (one per seed)."""
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    lam = cfg.lam if lam is None else lam
    results = _map(_MemoryJob(cfg, tau_max, lam, shuffle_test), list(seeds), workers)
    caps = [r[0] for r in results]
    errs = [r[1] for r in results]
    return _aggregate(caps, errs, tau_max, results[-1][2], results[-1][3], [r[4].dropped for r in results])


def narma_task(cfg: ReservoirConfig, tau_max: int, lam: float | None, seeds, workers=None) -> TaskResult:
    """NARMA reconstruction averaged over realizations; inputs drawn from the config range."""
    if not 0.0 <= cfg.input_low <= cfg.input_high <= NARMA_INPUT_HIGH:
        raise ValueError(f"NARMA inputs must lie in [0, {NARMA_INPUT_HIGH}]")
    lam = cfg.lam if lam is None else lam
    results = _map(_NarmaJob(cfg, tau_max, lam), list(seeds), workers)
    caps = [r[0] for r in results]
    errs = [r[1] for r in results]
    return _aggregate(caps, errs, 1, results[-1][2], results[-1][3], [r[4].dropped for r in results])


@dataclass(frozen=True)
class _MemoryJob:
    cfg: ReservoirConfig
    tau_max: int
    lam: float
    shuffle_test: bool = False

    def __call__(self, seed):
        return memory_realization(self.cfg, self.tau_max, self.lam, seed, self.shuffle_test)


@dataclass(frozen=True)
class _NarmaJob:
    cfg: ReservoirConfig
    tau_max: int
    lam: float

    def __call__(self, seed):
        return narma_realization(self.cfg, self.tau_max, self.lam, seed)
