"""Experiment configuration: parsing, defaults and validation."""

from __future__ import annotations

import difflib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .learning import NARMA_INPUT_HIGH, ReservoirConfig
from .operators import ModelParams

KINDS = (
    "spectrum-scan",
    "gamma-critical",
    "distance",
    "negativity",
    "qrc-linear",
    "qrc-narma",
    "emulate-check",
)


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SweepConfig:
    gamma: tuple[float, ...] = (0.0,)
    delta_x: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class SpectrumConfig:
    gamma_min: float = 0.0
    gamma_max: float = 4.0
    tol: float = 1e-3
    scan_step: float = 0.05


@dataclass(frozen=True)
class DynamicsConfig:
    dt: float = 0.05
    t_max: float = 20.0
    record_every: int = 4
    # initial-state pairs (distance) or bipartitions (negativity) per realization
    samples: int = 1


@dataclass(frozen=True)
class TaskConfig:
    tau_max: int = 10


@dataclass(frozen=True)
class EmulationConfig:
    dt: tuple[float, ...] = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
    n_sites: tuple[int, ...] = (1, 3)
    shifts: tuple[float, ...] = (1.1, 2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: ModelParams = field(default_factory=ModelParams)
    reservoir: dict = field(default_factory=dict)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    emulation: EmulationConfig = field(default_factory=EmulationConfig)
    ensemble: int = 100
    seed: int = 0
    out: str = "results"

    def reservoir_config(self, gamma: float | None = None, delta_x: float | None = None) -> ReservoirConfig:
        params = self.model
        if gamma is not None:
            params = params.with_(gamma=float(gamma))
        if delta_x is not None:
            params = params.with_(delta_x=float(delta_x))
        settings = dict(self.reservoir)
        if self.kind == "qrc-narma":
            settings.setdefault("input_high", NARMA_INPUT_HIGH)
        return ReservoirConfig(params=params, **settings)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, dict):
                d[key] = {k: list(v) if isinstance(v, tuple) else v for k, v in value.items()}
        return d


_SECTIONS = {
    "model": ModelParams,
    "sweep": SweepConfig,
    "spectrum": SpectrumConfig,
    "dynamics": DynamicsConfig,
    "task": TaskConfig,
    "emulation": EmulationConfig,
}
_RESERVOIR_KEYS = [f.name for f in fields(ReservoirConfig) if f.name != "params"]
_TOP_KEYS = ["kind", "ensemble", "seed", "out", "reservoir", *_SECTIONS]


def _reject_unknown(keys, allowed, where: str) -> None:
    for key in keys:
        if key not in allowed:
            hint = difflib.get_close_matches(str(key), allowed, n=1)
            extra = f"; did you mean '{hint[0]}'?" if hint else ""
            raise ConfigError(f"{where}{key}", f"unknown key{extra}")


def _coerce(value, default, name: str):
    """Cast ``value`` to the type of the field default."""
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, tuple):
            seq = value if isinstance(value, (list, tuple)) else [value]
            if not seq:
                raise ConfigError(name, "must be a non-empty list")
            return tuple(_coerce(v, default[0], name) for v in seq)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected {type(default).__name__}, got {value!r}") from None
    return value


def _build_section(cls, raw, where: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(where, "must be a mapping")
    names = [f.name for f in fields(cls)]
    _reject_unknown(raw, names, f"{where}.")
    defaults = cls()
    kwargs = {k: _coerce(v, getattr(defaults, k), f"{where}.{k}") for k, v in raw.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(where, str(exc)) from None


def parse_config_text(text: str) -> dict:
    """YAML or JSON text to a mapping (JSON is valid YAML)."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML/JSON: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    return data


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def validate_config(raw, kind: str | None = None) -> ExperimentConfig:
    """Checked :class:`ExperimentConfig` from a mapping or YAML/JSON text.

    Missing sections take the model defaults.  ``kind`` (e.g. from the CLI
    subcommand) fills in or must agree with the document's ``kind``.
    """
    if isinstance(raw, str):
        raw = parse_config_text(raw)
    raw = dict(raw)
    _reject_unknown(raw, _TOP_KEYS, "")
    doc_kind = raw.pop("kind", None)
    if kind is not None and doc_kind is not None and kind != doc_kind:
        raise ConfigError("kind", f"config says {doc_kind!r} but {kind!r} was requested")
    kind = kind or doc_kind
    if kind is None:
        raise ConfigError("kind", "missing experiment kind")
    if kind not in KINDS:
        hint = difflib.get_close_matches(str(kind), KINDS, n=1)
        raise ConfigError("kind", f"unknown kind {kind!r}" + (f"; did you mean '{hint[0]}'?" if hint else ""))

    sections = {name: _build_section(cls, raw.get(name), name) for name, cls in _SECTIONS.items()}

    res_raw = raw.get("reservoir") or {}
    if not isinstance(res_raw, dict):
        raise ConfigError("reservoir", "must be a mapping")
    _reject_unknown(res_raw, _RESERVOIR_KEYS, "reservoir.")
    res_defaults = ReservoirConfig()
    reservoir = {k: _coerce(v, getattr(res_defaults, k), f"reservoir.{k}") for k, v in res_raw.items()}
    top_defaults = ExperimentConfig(kind=kind)
    ensemble = _coerce(raw.get("ensemble", top_defaults.ensemble), 1, "ensemble")
    seed = _coerce(raw.get("seed", top_defaults.seed), 1, "seed")
    out = _coerce(raw.get("out", top_defaults.out), "", "out")
    cfg = ExperimentConfig(kind=kind, reservoir=reservoir, ensemble=ensemble, seed=seed, out=out, **sections)
    try:
        rc = cfg.reservoir_config()
    except ValueError as exc:
        raise ConfigError("reservoir", str(exc)) from None
    if kind == "qrc-narma" and not 0.0 <= rc.input_low <= rc.input_high <= NARMA_INPUT_HIGH:
        raise ConfigError("reservoir.input_high", f"NARMA inputs must lie in [0, {NARMA_INPUT_HIGH}]")
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: ExperimentConfig) -> None:
    if cfg.ensemble < 1:
        raise ConfigError("ensemble", f"must be >= 1, got {cfg.ensemble}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    if any(g < 0 for g in cfg.sweep.gamma):
        raise ConfigError("sweep.gamma", "gamma values must be non-negative")
    if any(d < 0 for d in cfg.sweep.delta_x):
        raise ConfigError("sweep.delta_x", "disorder half-widths must be non-negative")
    sp = cfg.spectrum
    if not sp.gamma_max > sp.gamma_min >= 0:
        raise ConfigError("spectrum", "need 0 <= gamma_min < gamma_max")
    if sp.tol <= 0 or sp.scan_step <= 0:
        raise ConfigError("spectrum", "tol and scan_step must be positive")
    dy = cfg.dynamics
    if dy.dt <= 0 or dy.t_max <= 0:
        raise ConfigError("dynamics", "dt and t_max must be positive")
    if dy.record_every < 1 or dy.samples < 1:
        raise ConfigError("dynamics", "record_every and samples must be >= 1")
    if cfg.task.tau_max < 1:
        raise ConfigError("task.tau_max", "must be >= 1")
    em = cfg.emulation
    if any(d <= 0 for d in em.dt) or any(b >= a for a, b in zip(em.dt, em.dt[1:])):
        raise ConfigError("emulation.dt", "must be positive and strictly descending")
    if any(n < 1 or n > 8 for n in em.n_sites):
        raise ConfigError("emulation.n_sites", "must lie in 1..8")
    from .graph import _check_params

    try:
        _check_params(cfg.model.n, cfg.model.k)
    except ValueError as exc:
        raise ConfigError("model.k", str(exc)) from None
    if cfg.model.n > 12:
        raise ConfigError("model.n", "dense simulation limited to N <= 12")
    if cfg.kind == "negativity" and cfg.model.n % 2:
        raise ConfigError("model.n", "negativity uses an N/2 bipartition and needs even N")


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
