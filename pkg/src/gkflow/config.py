"""Run configuration: a TOML file mapping onto the package's dataclasses.

One file describes one run: the ambient dimension and kappa, the initial
shape, step control, surgery parameters, monitor knobs and estimate
tolerances, and the output directory. Unknown keys are rejected so a config
is always a complete, diffable record of an experiment.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:                     # Python 3.10
    import tomli as tomllib

from .engine import StepControl
from .errors import ConfigError
from .monitors import MonitorTolerances
from .profile import (ProfileCurve, capsule_profile, cylinder_profile,
                      dumbbell_profile, load_profile, sphere_profile,
                      tube_profile)
from .surgery import SurgeryParams

SHAPE_FIELDS = {
    "sphere": {"r": 1.0, "points": 400},
    "cylinder": {"r": 1.0, "period": 6.2831853071795864769, "points": 400},
    "capsule": {"r": 1.0, "length": 10.0, "points": 900},
    "dumbbell": {"bulb_r": 1.0, "neck_r": 0.35, "separation": 4.0,
                 "waist_len": 0.0, "points": 900},
    "tube": {"bulb_r": 1.0, "neck_r": 0.35, "waist_len": 4.2,
             "shoulder": 2.0, "points": 1400},
    "profile_file": {"path": "", "points": 0},
}


@dataclass(frozen=True)
class ShapeSpec:
    kind: str = "sphere"
    params: dict = field(default_factory=lambda: dict(SHAPE_FIELDS["sphere"]))

    def build(self, n: int) -> ProfileCurve:
        q = dict(self.params)
        N = int(q.pop("points", 400))
        if self.kind == "sphere":
            return sphere_profile(q["r"], N, n=n)
        if self.kind == "cylinder":
            return cylinder_profile(q["r"], q["period"], N, n=n)
        if self.kind == "capsule":
            return capsule_profile(q["r"], q["length"], N, n=n)
        if self.kind == "dumbbell":
            return dumbbell_profile(q["bulb_r"], q["neck_r"], q["separation"],
                                    N, n=n, waist_len=q.get("waist_len", 0.0))
        if self.kind == "tube":
            return tube_profile(q["bulb_r"], q["neck_r"], q["waist_len"], N,
                                n=n, shoulder=q.get("shoulder", 2.0))
        if self.kind == "profile_file":
            return load_profile(q["path"])
        raise ConfigError(f"unknown shape kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    n: int = 3
    kappa: float = 0.0
    t_max: float = 1.0
    seed: int = 0
    out_dir: str = "out"
    surgery: bool = False
    monitor_stride: int = 10
    monitor_mu_stride: int = 10
    monitor_sigma: float = 0.1
    shape: ShapeSpec = field(default_factory=ShapeSpec)
    step: StepControl = field(default_factory=StepControl)
    surgery_params: SurgeryParams = field(default_factory=SurgeryParams)
    tolerances: MonitorTolerances = field(default_factory=MonitorTolerances)

    def build_initial(self) -> ProfileCurve:
        return self.shape.build(self.n)


_RUN_KEYS = {"n": int, "kappa": float, "t_max": float, "seed": int,
             "out_dir": str, "surgery": bool, "monitor_stride": int,
             "monitor_mu_stride": int, "monitor_sigma": float}


def _coerce(value, typ, key):
    if typ is float and isinstance(value, (int, float)) \
            and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, typ) and not (typ is not bool
                                       and isinstance(value, bool)):
        return value
    raise ConfigError(f"key {key!r}: expected {typ.__name__}, "
                      f"got {type(value).__name__}")


def _load_section(table: dict, cls, name: str, tuples=()):
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        if key in tuples:
            if not isinstance(value, list):
                raise ConfigError(f"key {name}.{key}: expected a list")
            value = tuple(float(v) for v in value)
        elif isinstance(value, bool):
            raise ConfigError(f"key {name}.{key}: expected a number")
        elif isinstance(value, int):
            value = float(value) if "float" in str(known[key]) else value
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section {name}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc

    kwargs = {}
    run = doc.pop("run", {})
    for key, value in run.items():
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key run.{key}")
        kwargs[key] = _coerce(value, _RUN_KEYS[key], f"run.{key}")

    shape_tab = doc.pop("shape", None)
    if shape_tab is not None:
        shape_tab = dict(shape_tab)
        kind = shape_tab.pop("kind", "sphere")
        if kind not in SHAPE_FIELDS:
            raise ConfigError(f"unknown shape kind {kind!r}")
        params = dict(SHAPE_FIELDS[kind])
        for key, value in shape_tab.items():
            if key not in params:
                raise ConfigError(f"unknown key shape.{key} for kind {kind!r}")
            want = type(params[key])
            params[key] = _coerce(value, want, f"shape.{key}")
        kwargs["shape"] = ShapeSpec(kind=kind, params=params)

    if "step" in doc:
        kwargs["step"] = _load_section(doc.pop("step"), StepControl, "step")
    if "surgery_params" in doc:
        kwargs["surgery_params"] = _load_section(
            doc.pop("surgery_params"), SurgeryParams, "surgery_params",
            tuples=("delta_grid",))
    if "tolerances" in doc:
        kwargs["tolerances"] = _load_section(
            doc.pop("tolerances"), MonitorTolerances, "tolerances")
    if doc:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(doc))}")
    try:
        return RunConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {value!r}")


def dumps_config(cfg: RunConfig) -> str:
    lines = ["[run]"]
    for key in _RUN_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    lines += ["", "[shape]", f'kind = "{cfg.shape.kind}"']
    for key, value in cfg.shape.params.items():
        lines.append(f"{key} = {_fmt(value)}")
    for section, obj in (("step", cfg.step),
                         ("surgery_params", cfg.surgery_params),
                         ("tolerances", cfg.tolerances)):
        lines += ["", f"[{section}]"]
        for key, value in asdict(obj).items():
            if value is None:
                continue
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def default_config() -> RunConfig:
    return RunConfig()
