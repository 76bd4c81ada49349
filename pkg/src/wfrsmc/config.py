"""Experiment configuration: JSON in, validated dataclass out.

Every field is checked before any computation starts; failures raise
:class:`ConfigError` naming the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import (
    DiffusionSchedule,
    InvalidArgumentError,
    TimeSchedule,
    constant_schedule,
    vp_schedule,
)
from .correctors import InterpolationKind, InterpolationSpec
from .models import FieldSet, GaussianMixtureModel
from .reaction import ResampleScheme

EXPERIMENTS = ("sample", "oracle", "jump_equivalence", "geodesic", "diagnostics")
MODES = ("reweight", "jump")


class ConfigError(InvalidArgumentError):
    """Invalid configuration; ``field`` names the offending entry."""

    kind = "config"

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _number(value, name: str, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(name, "must be finite")
    if positive and not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(name, f"must be nonnegative, got {value!r}")
    return int(value) if integer else float(value)


def _mixture(raw, name: str) -> GaussianMixtureModel:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(name, "expected a non-empty list of [mean, var, weight] triples")
    triples = []
    dim = None
    for i, comp in enumerate(raw):
        where = f"{name}[{i}]"
        if not isinstance(comp, list) or len(comp) != 3:
            raise ConfigError(where, "expected [mean, var, weight]")
        mean = comp[0] if isinstance(comp[0], list) else [comp[0]]
        mean = [_number(m, f"{where}.mean") for m in mean]
        if dim is None:
            dim = len(mean)
        elif len(mean) != dim:
            raise ConfigError(where, "component means have different dimensions")
        triples.append((mean, _number(comp[1], f"{where}.var", positive=True),
                        _number(comp[2], f"{where}.weight", positive=True)))
    return GaussianMixtureModel.from_triples(triples)


@dataclass(frozen=True)
class ScheduleConfig:
    """Diffusion schedule family and the reverse-time grid."""

    family: str = "vp"
    beta_min: float = 0.1
    beta_max: float = 20.0
    stationary_var: float = 1.0
    kappa: float = 0.0
    sigma: float = 1.0
    n_steps: int = 500
    t_start: float = 1.0
    t_end: float = 0.0

    def diffusion(self) -> DiffusionSchedule:
        if self.family == "vp":
            return vp_schedule(self.beta_min, self.beta_max, self.stationary_var)
        return constant_schedule(self.kappa, self.sigma)

    def time_grid(self) -> TimeSchedule:
        return TimeSchedule(self.t_start, self.t_end, self.n_steps)

    def to_dict(self) -> dict:
        out = {"family": self.family, "n_steps": self.n_steps, "t_start": self.t_start, "t_end": self.t_end}
        if self.family == "vp":
            out.update(beta_min=self.beta_min, beta_max=self.beta_max, stationary_var=self.stationary_var)
        else:
            out.update(kappa=self.kappa, sigma=self.sigma)
        return out


@dataclass(frozen=True)
class GridConfig:
    lo: float = -7.0
    hi: float = 9.0
    n_cells: int = 256

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n_cells": self.n_cells}


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "sample"
    model1: GaussianMixtureModel = field(default_factory=lambda: GaussianMixtureModel.gaussian(0.0, 1.0))
    model2: GaussianMixtureModel = field(default_factory=lambda: GaussianMixtureModel.gaussian(2.0, 1.0))
    interpolation: InterpolationSpec = field(default_factory=InterpolationSpec)
    schedule_config: ScheduleConfig = field(default_factory=ScheduleConfig)
    particles: int = 20_000
    resample: ResampleScheme = field(default_factory=ResampleScheme)
    seed: int = 0
    snapshots: tuple = ()
    output_dir: str = "out"
    mode: str = "reweight"
    grid: GridConfig = field(default_factory=GridConfig)

    @property
    def schedule(self) -> TimeSchedule:
        return self.schedule_config.time_grid()

    def fields(self) -> FieldSet:
        return FieldSet(self.model1, self.model2, self.schedule_config.diffusion())

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return parse_config(data)

    def to_dict(self) -> dict:
        def triples(m):
            return [[list(c.mean) if len(c.mean) > 1 else c.mean[0], c.var, math.exp(c.log_weight)]
                    for c in m.components]

        return {
            "experiment": self.experiment,
            "model1": triples(self.model1),
            "model2": triples(self.model2),
            "interpolation": {"kind": self.interpolation.kind.value, "beta": self.interpolation.beta},
            "schedule": self.schedule_config.to_dict(),
            "particles": self.particles,
            "resample": {"kind": self.resample.kind, "trigger": self.resample.trigger,
                         "value": self.resample.value},
            "seed": self.seed,
            "snapshots": list(self.snapshots),
            "output_dir": self.output_dir,
            "mode": self.mode,
            "grid": self.grid.to_dict(),
        }


_SCHEDULE_KEYS = {
    "vp": {"family", "beta_min", "beta_max", "stationary_var", "n_steps", "t_start", "t_end"},
    "constant": {"family", "kappa", "sigma", "n_steps", "t_start", "t_end"},
}


def _section(raw, name: str, allowed: set) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}", "unknown field")
    return raw


def parse_config(raw: Any) -> RunConfig:
    """Validate a decoded JSON object and build a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    top = {"experiment", "model1", "model2", "interpolation", "schedule", "particles", "resample",
           "seed", "snapshots", "output_dir", "mode", "grid"}
    _section(raw, "<root>", top)
    d = RunConfig()
    kw: dict = {}

    if "experiment" in raw:
        if raw["experiment"] not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        kw["experiment"] = raw["experiment"]
    for name in ("model1", "model2"):
        if name in raw:
            try:
                kw[name] = _mixture(raw[name], name)
            except ConfigError:
                raise
            except InvalidArgumentError as exc:
                raise ConfigError(name, str(exc)) from None
    m1, m2 = kw.get("model1", d.model1), kw.get("model2", d.model2)
    if m1.dim != m2.dim:
        raise ConfigError("model2", "must have the same dimension as model1")

    if "interpolation" in raw:
        sec = _section(raw["interpolation"], "interpolation", {"kind", "beta"})
        kind = sec.get("kind", "geometric")
        if kind not in [k.value for k in InterpolationKind]:
            raise ConfigError("interpolation.kind", f"unknown kind {kind!r}")
        beta = _number(sec.get("beta", 0.5), "interpolation.beta")
        try:
            kw["interpolation"] = InterpolationSpec(kind, beta)
        except InvalidArgumentError as exc:
            raise ConfigError("interpolation.beta", str(exc)) from None

    if "schedule" in raw:
        sec = raw["schedule"]
        if not isinstance(sec, dict):
            raise ConfigError("schedule", "expected an object")
        family = sec.get("family", "vp")
        if family not in _SCHEDULE_KEYS:
            raise ConfigError("schedule.family", "must be 'vp' or 'constant'")
        _section(sec, "schedule", _SCHEDULE_KEYS[family])
        vals = {"family": family}
        for key in _SCHEDULE_KEYS[family] - {"family"}:
            if key in sec:
                vals[key] = _number(
                    sec[key], f"schedule.{key}",
                    integer=key == "n_steps",
                    positive=key in ("n_steps", "stationary_var", "sigma"),
                    nonneg=key in ("beta_min", "beta_max", "t_start", "t_end"),
                )
        sc = ScheduleConfig(**vals)
        if sc.family == "vp" and sc.beta_max < sc.beta_min:
            raise ConfigError("schedule.beta_max", "must be at least beta_min")
        if not sc.t_end < sc.t_start:
            raise ConfigError("schedule.t_end", "sampling runs in reverse: need t_end < t_start")
        kw["schedule_config"] = sc

    if "particles" in raw:
        kw["particles"] = _number(raw["particles"], "particles", integer=True, positive=True)

    if "resample" in raw:
        sec = _section(raw["resample"], "resample", {"kind", "trigger", "value"})
        try:
            kw["resample"] = ResampleScheme(
                sec.get("kind", "systematic"),
                sec.get("trigger", "ess_below"),
                _number(sec.get("value", 0.5), "resample.value"),
            )
        except ConfigError:
            raise
        except InvalidArgumentError as exc:
            raise ConfigError("resample", str(exc)) from None

    if "seed" in raw:
        seed = _number(raw["seed"], "seed", integer=True, nonneg=True)
        if seed >= 2**64:
            raise ConfigError("seed", "must fit in 64 bits")
        kw["seed"] = seed

    sched = kw.get("schedule_config", d.schedule_config).time_grid()
    if "snapshots" in raw:
        snaps = raw["snapshots"]
        if not isinstance(snaps, list):
            raise ConfigError("snapshots", "expected a list of times")
        vals = []
        for i, t in enumerate(snaps):
            t = _number(t, f"snapshots[{i}]")
            try:
                sched.index_of(t)
            except InvalidArgumentError:
                raise ConfigError(f"snapshots[{i}]", f"time {t} is not on the schedule grid") from None
            vals.append(t)
        kw["snapshots"] = tuple(vals)

    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str) or not raw["output_dir"]:
            raise ConfigError("output_dir", "expected a non-empty path string")
        kw["output_dir"] = raw["output_dir"]

    if "mode" in raw:
        if raw["mode"] not in MODES:
            raise ConfigError("mode", "must be 'reweight' or 'jump'")
        kw["mode"] = raw["mode"]

    if "grid" in raw:
        sec = _section(raw["grid"], "grid", {"lo", "hi", "n_cells"})
        g = GridConfig(
            _number(sec.get("lo", -7.0), "grid.lo"),
            _number(sec.get("hi", 9.0), "grid.hi"),
            _number(sec.get("n_cells", 256), "grid.n_cells", integer=True, positive=True),
        )
        if not g.hi > g.lo:
            raise ConfigError("grid.hi", "must exceed grid.lo")
        if g.n_cells < 3:
            raise ConfigError("grid.n_cells", "need at least 3 cells")
        kw["grid"] = g

    return RunConfig(**kw)


def load_config(path: Optional[str]) -> RunConfig:
    """Read and validate a JSON config file; ``None`` gives the default benchmark."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(raw)
