"""Ensemble experiments: seeding, dispatch, CSV export and the run manifest."""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .config import ExperimentConfig
from .dynamics import (
    distinguishability_trajectory,
    negativity_trajectory,
    random_mixed_state,
    reservoir_jump_operators,
    trace_distance,
)
from .emulation import build_ensemble, emulate_step, emulation_error_scan
from .io import RunManifest, write_csv
from .learning import linear_memory_task, narma_task, realization_seeds
from .operators import PAULI, ModelParams, ReservoirModel
from .parallel import ordered_map, worker_count
from .spectrum import complex_tolerance, count_complex, find_gamma_critical, max_imag


class RealizationError(RuntimeError):
    """A single realization failed; the run is aborted."""

    def __init__(self, index: int, seed: list[int], cause: BaseException):
        super().__init__(f"realization {index} (seed entropy {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed


def realization_seed(master: int, kind: str, index: int) -> np.random.SeedSequence:
    """Seed for realization ``index``: a pure function of (master seed, kind, index)."""
    return np.random.SeedSequence([int(master), zlib.crc32(kind.encode()), int(index)])


def _seed_record(ss: np.random.SeedSequence) -> list[int]:
    return [int(x) for x in np.atleast_1d(ss.entropy)]


def sample_model(params: ModelParams, seed) -> ReservoirModel:
    s = realization_seeds(seed)
    return ReservoirModel.sample(params, s["graph"], s["disorder"])


def _stderr(x: np.ndarray, axis: int = 0):
    n = x.shape[axis]
    return x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(x.mean(axis=axis))


@dataclass(frozen=True)
class _Guarded:
    """Runs ``fn(index, seed)`` and tags any failure with the realization."""

    fn: object

    def __call__(self, item):
        index, seed = item
        try:
            return self.fn(index, seed)
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise RealizationError(index, _seed_record(seed), exc) from exc


# --------------------------------------------------------------------------
# per-realization jobs

@dataclass(frozen=True)
class _SpectrumJob:
    params: ModelParams
    gammas: tuple

    def __call__(self, index, seed):
        model = sample_model(self.params, seed)
        rows = []
        for g in self.gammas:
            h = model.hamiltonian(g)
            ev = np.linalg.eigvals(h)
            rows.append((count_complex(ev, complex_tolerance(h)), max_imag(ev)))
        return rows


@dataclass(frozen=True)
class _GammaCriticalJob:
    params: ModelParams
    gamma_range: tuple
    tol: float
    scan_step: float

    def __call__(self, index, seed):
        model = sample_model(self.params, seed)
        r = find_gamma_critical(model, self.gamma_range, self.tol, self.scan_step)
        return r.gamma_c, r.prediction, r.resolved


@dataclass(frozen=True)
class _DistanceJob:
    params: ModelParams
    gammas: tuple
    dt: float
    t_max: float
    record_every: int
    samples: int

    def __call__(self, index, seed):
        model = sample_model(self.params, seed)
        state_ss = realization_seeds(seed)["state"]
        pair_seeds = [np.random.SeedSequence(state_ss.entropy, spawn_key=state_ss.spawn_key + (j,)) for j in range(self.samples)]
        out = []
        for g in self.gammas:
            rec = distinguishability_trajectory(model.with_gamma(g), self.t_max, self.dt, pair_seeds, self.record_every)
            out.append((rec.times, rec.samples["distance"], rec.samples["purity"]))
        return out


@dataclass(frozen=True)
class _NegativityJob:
    params: ModelParams
    gammas: tuple
    dt: float
    t_max: float
    record_every: int
    samples: int

    def __call__(self, index, seed):
        model = sample_model(self.params, seed)
        state_ss = realization_seeds(seed)["state"]
        cut_seeds = [np.random.SeedSequence(state_ss.entropy, spawn_key=state_ss.spawn_key + (j,)) for j in range(self.samples)]
        out = []
        for g in self.gammas:
            rec = negativity_trajectory(model.with_gamma(g), self.t_max, self.dt, cut_seeds, self.record_every)
            out.append((rec.times, rec.samples["negativity"]))
        return out


def emulation_instance(n_sites: int, params: ModelParams, seed):
    """``(H, jumps)`` for the emulation check.

    One site uses ``H = s^x`` with ``L = s^-``; larger instances use the
    Hermitian part of a sampled reservoir model with the reservoir jumps.
    """
    if n_sites == 1:
        return PAULI["x"], PAULI["-"][None]
    k = min(params.k, n_sites - 1)
    if (n_sites * k) % 2:
        k -= 1
    model = sample_model(params.with_(n=n_sites, k=k), seed)
    return model.hamiltonian(0.0), reservoir_jump_operators(n_sites)


@dataclass(frozen=True)
class _EmulationJob:
    params: ModelParams
    n_sites: int
    gammas: tuple
    dts: tuple
    shifts: tuple

    def __call__(self, index, seed):
        h, jumps = emulation_instance(self.n_sites, self.params, seed)
        rho0 = random_mixed_state(h.shape[0], realization_seeds(seed)["state"])
        out = []
        for g in self.gammas:
            scan = emulation_error_scan(h, jumps, g, self.dts, rho0, shifts=self.shifts[0])
            mid = self.dts[len(self.dts) // 2]
            a = emulate_step(rho0, build_ensemble(h, jumps, g, mid, self.shifts[0]))
            b = emulate_step(rho0, build_ensemble(h, jumps, g, mid, self.shifts[-1]))
            envelope = scan.envelope(mid) if np.isfinite(scan.slope) else 0.0
            out.append((scan.errors, scan.slope, trace_distance(a, b), envelope))
        return out


# --------------------------------------------------------------------------
# experiment drivers; each returns (files, summary)

def _run_spectrum_scan(cfg, seeds, workers, out):
    gammas = cfg.sweep.gamma
    per_rows, sum_rows = [], []
    for dx in cfg.sweep.delta_x:
        res = ordered_map(_Guarded(_SpectrumJob(cfg.model.with_(delta_x=dx), gammas)), seeds, workers)
        arr = np.array(res, dtype=float)  # (R, G, 2)
        for r in range(arr.shape[0]):
            for j, g in enumerate(gammas):
                per_rows.append((dx, g, r, int(arr[r, j, 0]), arr[r, j, 1]))
        for j, g in enumerate(gammas):
            nc, lim = arr[:, j, 0], arr[:, j, 1]
            sum_rows.append((dx, g, float(np.mean(nc > 0)), nc.mean(), lim.mean(), _stderr(lim), len(nc)))
    files = [
        write_csv(out / "spectrum_scan.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("realization", "1"), ("n_complex", "1"), ("lambda_im", "J_z")],
                  per_rows),
        write_csv(out / "spectrum_summary.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("frac_complex", "1"), ("n_complex_mean", "1"),
                   ("lambda_im_mean", "J_z"), ("lambda_im_stderr", "J_z"), ("n_realizations", "1")],
                  sum_rows),
    ]
    return files, {}


def _run_gamma_critical(cfg, seeds, workers, out):
    sp = cfg.spectrum
    per_rows, sum_rows = [], []
    means = []
    for dx in cfg.sweep.delta_x:
        job = _GammaCriticalJob(cfg.model.with_(delta_x=dx), (sp.gamma_min, sp.gamma_max), sp.tol, sp.scan_step)
        res = ordered_map(_Guarded(job), seeds, workers)
        gc = np.array([r[0] for r in res])
        pred = np.array([r[1] for r in res])
        ok = np.array([r[2] for r in res])
        for i, (a, b, c) in enumerate(res):
            per_rows.append((dx, i, a, b, int(c)))
        sel = gc[ok] if ok.any() else gc
        means.append(sel.mean())
        sum_rows.append((dx, sel.mean(), _stderr(sel) if len(sel) > 1 else 0.0, pred.mean(), int(ok.sum()), len(gc)))
    files = [
        write_csv(out / "gamma_critical.csv",
                  [("delta_x", "J_z"), ("realization", "1"), ("gamma_c", "J_z"), ("prediction", "J_z"), ("resolved", "1")],
                  per_rows),
        write_csv(out / "gamma_critical_summary.csv",
                  [("delta_x", "J_z"), ("gamma_c_mean", "J_z"), ("gamma_c_stderr", "J_z"), ("prediction_mean", "J_z"),
                   ("n_resolved", "1"), ("n_realizations", "1")],
                  sum_rows),
    ]
    summary = {}
    if len(cfg.sweep.delta_x) >= 2:
        slope, intercept = np.polyfit(cfg.sweep.delta_x, means, 1)
        summary = {"slope": float(slope), "intercept": float(intercept)}
    return files, summary


def _run_distance(cfg, seeds, workers, out):
    dy = cfg.dynamics
    gammas = cfg.sweep.gamma
    traj_rows, fit_rows = [], []
    from .dynamics import fit_decay_rate

    for dx in cfg.sweep.delta_x:
        job = _DistanceJob(cfg.model.with_(delta_x=dx), gammas, dy.dt, dy.t_max, dy.record_every, dy.samples)
        res = ordered_map(_Guarded(job), seeds, workers)
        for j, g in enumerate(gammas):
            times = res[0][j][0]
            dist = np.concatenate([r[j][1] for r in res])
            pur = np.concatenate([r[j][2] for r in res])
            d_mean, d_se, p_mean = dist.mean(axis=0), _stderr(dist), pur.mean(axis=0)
            for t, a, b, c in zip(times, d_mean, d_se, p_mean):
                traj_rows.append((dx, g, t, a, b, c))
            fit = fit_decay_rate(times, d_mean)
            fit_rows.append((dx, g, d_mean[0], fit["rate"], fit["zeta"], fit["r2"], dist.shape[0]))
    files = [
        write_csv(out / "distance.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("t", "1/J_z"), ("distance_mean", "1"),
                   ("distance_stderr", "1"), ("purity_mean", "1")],
                  traj_rows),
        write_csv(out / "distance_fit.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("distance_initial", "1"), ("rate", "J_z"),
                   ("zeta", "1/J_z"), ("r2", "1"), ("n_pairs", "1")],
                  fit_rows),
    ]
    return files, {}


def steady_state_value(series: np.ndarray, fraction: float = 0.25) -> np.ndarray:
    """Mean over the last ``fraction`` of each row."""
    series = np.atleast_2d(series)
    start = int(series.shape[1] * (1 - fraction))
    return series[:, start:].mean(axis=1)


def _run_negativity(cfg, seeds, workers, out):
    dy = cfg.dynamics
    gammas = cfg.sweep.gamma
    traj_rows, steady_rows = [], []
    for dx in cfg.sweep.delta_x:
        job = _NegativityJob(cfg.model.with_(delta_x=dx), gammas, dy.dt, dy.t_max, dy.record_every, dy.samples)
        res = ordered_map(_Guarded(job), seeds, workers)
        for j, g in enumerate(gammas):
            times = res[0][j][0]
            neg = np.stack([r[j][1].mean(axis=0) for r in res])  # (R, T)
            for t, a, b in zip(times, neg.mean(axis=0), _stderr(neg)):
                traj_rows.append((dx, g, t, a, b))
            ss = steady_state_value(neg)
            steady_rows.append((dx, g, neg[:, 0].mean(), ss.mean(), _stderr(ss) if len(ss) > 1 else 0.0, len(ss)))
    files = [
        write_csv(out / "negativity.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("t", "1/J_z"), ("negativity_mean", "ebit"),
                   ("negativity_stderr", "ebit")],
                  traj_rows),
        write_csv(out / "negativity_steady.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("negativity_initial", "ebit"), ("negativity_steady", "ebit"),
                   ("negativity_steady_stderr", "ebit"), ("n_realizations", "1")],
                  steady_rows),
    ]
    return files, {}


def _run_qrc(cfg, seeds, workers, out, narma: bool):
    tau_max = cfg.task.tau_max
    main_rows, delay_rows = [], []
    for dx in cfg.sweep.delta_x:
        for g in cfg.sweep.gamma:
            rc = cfg.reservoir_config(gamma=g, delta_x=dx)
            ss = [s for _, s in seeds]
            try:
                if narma:
                    res = narma_task(rc, tau_max, None, ss, workers)
                else:
                    res = linear_memory_task(rc, tau_max, None, ss, workers)
            except Exception as exc:
                raise RuntimeError(f"qrc run at delta_x={dx}, gamma={g} failed: {exc!r}") from exc
            nr = res.per_realization["nrmse"].mean(axis=1)
            main_rows.append((dx, g, res.total, res.total_norm, res.total_norm_stderr,
                              float(nr.mean()), float(_stderr(nr)), res.n_realizations))
            if not narma:
                for j in range(tau_max):
                    delay_rows.append((dx, g, j + 1, res.capacities[j], res.capacities_stderr[j], res.nrmse[j]))
    name = "qrc_narma" if narma else "qrc_linear"
    files = [
        write_csv(out / f"{name}.csv",
                  [("delta_x", "J_z"), ("gamma", "J_z"), ("C_T", "1"), ("C_T_norm", "1"), ("C_T_norm_stderr", "1"),
                   ("nrmse", "1"), ("nrmse_stderr", "1"), ("n_realizations", "1")],
                  main_rows)
    ]
    if not narma:
        files.append(write_csv(out / "qrc_linear_delays.csv",
                               [("delta_x", "J_z"), ("gamma", "J_z"), ("tau", "steps"), ("C_tau", "1"),
                                ("C_tau_stderr", "1"), ("nrmse", "1")],
                               delay_rows))
    return files, {}


def _run_emulate_check(cfg, seeds, workers, out):
    em = cfg.emulation
    gammas = tuple(g for g in cfg.sweep.gamma)
    err_rows, slope_rows = [], []
    for n_sites in em.n_sites:
        job = _EmulationJob(cfg.model, n_sites, gammas, em.dt, em.shifts)
        res = ordered_map(_Guarded(job), seeds, workers)
        for r, per_gamma in enumerate(res):
            for j, g in enumerate(gammas):
                errors, slope, shift_diff, envelope = per_gamma[j]
                for dt, e in zip(em.dt, errors):
                    err_rows.append((n_sites, g, r, dt, e))
                slope_rows.append((n_sites, g, r, slope, shift_diff, envelope))
    files = [
        write_csv(out / "emulation_errors.csv",
                  [("n_sites", "1"), ("gamma", "J_z"), ("realization", "1"), ("dt", "1/J_z"), ("trace_distance", "1")],
                  err_rows),
        write_csv(out / "emulation_slopes.csv",
                  [("n_sites", "1"), ("gamma", "J_z"), ("realization", "1"), ("slope", "1"),
                   ("shift_difference", "1"), ("envelope", "1")],
                  slope_rows),
    ]
    return files, {}


_DRIVERS = {
    "spectrum-scan": _run_spectrum_scan,
    "gamma-critical": _run_gamma_critical,
    "distance": _run_distance,
    "negativity": _run_negativity,
    "qrc-linear": lambda *a: _run_qrc(*a, narma=False),
    "qrc-narma": lambda *a: _run_qrc(*a, narma=True),
    "emulate-check": _run_emulate_check,
}


def run_experiment(cfg: ExperimentConfig, out=None, workers: int | None = None) -> RunManifest:
    """Run ``cfg`` and write CSV tables plus ``manifest.json`` to ``out`` (default ``cfg.out``)."""
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count(workers)
    seeds = [(i, realization_seed(cfg.seed, cfg.kind, i)) for i in range(cfg.ensemble)]
    manifest = RunManifest(
        config=cfg.to_dict(),
        version=__version__,
        backend=backend(),
        seeds=[_seed_record(s) for _, s in seeds],
    )
    start = time.perf_counter()
    files, summary = _DRIVERS[cfg.kind](cfg, seeds, workers, out)
    manifest.timing = {"wall_seconds": round(time.perf_counter() - start, 3), "workers": workers}
    manifest.summary = summary
    for f in files:
        manifest.add_file(f)
    manifest.write(out)
    return manifest
