"""Flat ``key = value`` run configuration with dotted keys, and assumption checks.

Field-valued entries take a profile spec::

    2.5             constant
    const:2.5       constant
    cos:A[:k]       A cos(k * 2 pi x / lx), k defaults to 1
    sin:A[:k]       A sin(k * 2 pi x / lx)
    linear_y:A      A * y / height
    file:PATH       comma-separated numbers, one spatial field or one per time step
    trace           (surface entries only) trace of the matching bulk entry
"""

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .adjoint import CostData
from .errors import DomainError, GridError, ValidationError
from .fields import ControlBounds, ControlPair, InitialData
from .grid import StripGrid, TimeGrid, trace
from .optimize import OptimizerOptions
from .potentials import PotentialSet, QuenchConfig
from .quench import ANCHOR_MODES, QuenchSchedule
from .state import SolverOptions, StateModel

MODES = ("state", "obstacle", "optimize", "quench", "validate")


class ConfigError(ValueError):
    """Malformed configuration text or an unreadable referenced file."""


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {int: int, float: float, str: str.strip, bool: _bool, tuple: _floats}

_SCHEMA = {
    "mode": (str, "quench"),
    "out": (str, "results"),
    "seed": (int, 0),
    "fail_fast": (bool, False),
    "grid.nx": (int, 64),
    "grid.ny": (int, 16),
    "grid.lx": (float, 2.0 * math.pi),
    "grid.height": (float, 1.0),
    "time.T": (float, 1.0),
    "time.nt": (int, 50),
    "quench.p": (float, 1.0),
    "quench.q": (float, 1.0),
    "quench.c": (float, 1.0),
    "quench.schedule": (tuple, (1.0, 1e-1, 1e-2, 1e-3, 1e-4)),
    "quench.alpha": (float, 1e-2),
    "quench.anchor": (str, "none"),
    "quench.anchor_file": (str, ""),
    "potentials.f2p": (tuple, (0.0, -1.0)),
    "potentials.g2p": (tuple, (0.0, -1.0)),
    "cost.beta": (tuple, (1.0, 1.0, 1.0, 1.0, 1.0)),
    "cost.z_Q": (str, "cos:1.2"),
    "cost.z_Sigma": (str, "trace"),
    "cost.z_T": (str, "cos:1.2"),
    "cost.z_Gamma_T": (str, "trace"),
    "bounds.lower": (str, "-1"),
    "bounds.upper": (str, "1"),
    "bounds.lower_surface": (str, "-1"),
    "bounds.upper_surface": (str, "1"),
    "bounds.R": (float, 2.0),
    "initial.y0": (str, "cos:0.5"),
    "initial.y0_surface": (str, "trace"),
    "control.u": (str, "0"),
    "control.u_Gamma": (str, "0"),
}
for _f in fields(SolverOptions):
    _SCHEMA[f"solver.{_f.name}"] = (type(_f.default), _f.default)
for _f in fields(OptimizerOptions):
    _SCHEMA[f"optimizer.{_f.name}"] = (type(_f.default), _f.default)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (_, v) in _SCHEMA.items()})
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def with_values(self, **overrides):
        """Copy with some keys replaced; dots in keys are written as ``__``."""
        vals = dict(self.values)
        for k, v in overrides.items():
            key = k.replace("__", ".")
            if key not in _SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            vals[key] = v
        return RunConfig(vals, self.base_dir)

    def dump(self):
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in _SCHEMA)

    @classmethod
    def parse(cls, text, base_dir=None):
        vals = {k: v for k, (_, v) in _SCHEMA.items()}
        errors = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
                continue
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _SCHEMA:
                errors.append(f"line {lineno}: unknown key {key!r}")
                continue
            kind = _SCHEMA[key][0]
            try:
                vals[key] = _PARSERS[kind](val)
            except ValueError as exc:
                errors.append(f"line {lineno}: bad value for {key}: {exc}")
        if errors:
            raise ConfigError("\n".join(errors))
        return cls(vals, Path(base_dir) if base_dir is not None else Path.cwd())

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.parse(text, base_dir=path.parent)


def _spatial_profile(spec, grid):
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    xx = np.broadcast_to(grid.x, grid.shape)
    yy = np.broadcast_to(grid.y[:, None], grid.shape)
    try:
        if not rest:
            return np.full(grid.shape, float(kind))
        if kind == "const":
            return np.full(grid.shape, float(rest))
        if kind in ("cos", "sin"):
            parts = rest.split(":")
            amp, k = float(parts[0]), float(parts[1]) if len(parts) > 1 else 1.0
            fn = np.cos if kind == "cos" else np.sin
            return amp * fn(k * 2.0 * np.pi * xx / grid.lx)
        if kind == "linear_y":
            return float(rest) * yy / grid.height
    except ValueError as exc:
        raise ConfigError(f"bad profile {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown profile {spec!r}")


def _load_file(spec, base_dir):
    path = Path(spec.partition(":")[2].strip())
    if not path.is_absolute():
        path = base_dir / path
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load {path}: {exc}") from exc


def _reshape(data, shape, timed, nt, spec):
    if data.size == np.prod(shape):
        arr = data.reshape(shape)
        return np.tile(arr, (nt, 1, 1)) if timed else arr
    if timed and data.size == nt * np.prod(shape):
        return data.reshape((nt,) + shape)
    raise ConfigError(f"{spec!r}: {data.size} values do not fit shape {shape}" + (f" or {(nt,) + shape}" if timed else ""))


def bulk_field(spec, grid, time, base_dir, timed=False):
    if spec.startswith("file:"):
        return _reshape(_load_file(spec, base_dir), grid.shape, timed, time.nt, spec)
    f = _spatial_profile(spec, grid)
    return np.tile(f, (time.nt, 1, 1)) if timed else f


def surface_field(spec, grid, time, base_dir, timed=False, bulk=None):
    if spec.strip() == "trace":
        if bulk is None:
            raise ConfigError("'trace' is only allowed for surface entries")
        return trace(bulk, grid)
    if spec.startswith("file:"):
        return _reshape(_load_file(spec, base_dir), grid.surface_shape, timed, time.nt, spec)
    f = trace(_spatial_profile(spec, grid), grid)
    return np.tile(f, (time.nt, 1, 1)) if timed else f


@dataclass
class Problem:
    model: StateModel
    initial: InitialData
    cost: CostData
    bounds: ControlBounds
    control: ControlPair
    schedule: QuenchSchedule
    optimizer: OptimizerOptions


def build_problem(cfg):
    """Assemble the numerical objects; raises ConfigError, GridError or DomainError."""
    v, base = cfg.values, cfg.base_dir
    grid = StripGrid(v["grid.nx"], v["grid.ny"], v["grid.lx"], v["grid.height"])
    time = TimeGrid(v["time.T"], v["time.nt"])
    quench = QuenchConfig(v["quench.p"], v["quench.q"], v["quench.c"])
    potentials = PotentialSet.from_coefficients(v["potentials.f2p"], v["potentials.g2p"])
    solver = SolverOptions(**{f.name: v[f"solver.{f.name}"] for f in fields(SolverOptions)})
    optimizer = OptimizerOptions(**{f.name: v[f"optimizer.{f.name}"] for f in fields(OptimizerOptions)})
    model = StateModel(grid, time, potentials, quench, solver)

    def b(key, timed=False):
        return bulk_field(v[key], grid, time, base, timed)

    def s(key, timed=False, bulk=None):
        return surface_field(v[key], grid, time, base, timed, bulk)

    y0 = b("initial.y0")
    initial = InitialData(y0, s("initial.y0_surface", bulk=y0))
    z_q, z_t = b("cost.z_Q", True), b("cost.z_T")
    cost = CostData(v["cost.beta"], z_q, s("cost.z_Sigma", True, z_q), z_t, s("cost.z_Gamma_T", bulk=z_t))
    lower, upper = b("bounds.lower", True), b("bounds.upper", True)
    bounds = ControlBounds(
        ControlPair(lower, s("bounds.lower_surface", True, lower)),
        ControlPair(upper, s("bounds.upper_surface", True, upper)),
        v["bounds.R"],
    )
    u = b("control.u", True)
    control = ControlPair(u, s("control.u_Gamma", True, u))
    schedule = QuenchSchedule(v["quench.schedule"])
    return Problem(model, initial, cost, bounds, control, schedule, optimizer)


def validate_config(cfg):
    """Check every modelling assumption; returns the Problem or raises ValidationError.

    Violations are named ``A1_violation`` (bounds, weights, targets),
    ``A2_violation`` (potential coefficients, quench exponents),
    ``A3_violation`` (initial data), ``A4_violation`` (radius ``R``),
    ``A5_violation`` (terminal-target trace) and ``config_violation``.
    """
    bad = []
    v = cfg.values
    if v["mode"] not in MODES:
        bad.append(("config_violation", f"mode must be one of {MODES}, got {v['mode']!r}"))
    if v["quench.anchor"] not in ANCHOR_MODES:
        bad.append(("config_violation", f"quench.anchor must be one of {ANCHOR_MODES}"))
    if not 0.0 < v["quench.alpha"] <= 1.0:
        bad.append(("config_violation", f"quench.alpha must lie in (0, 1], got {v['quench.alpha']}"))
    if not all(map(math.isfinite, v["potentials.f2p"] + v["potentials.g2p"])):
        bad.append(("A2_violation", "potential coefficients must be finite"))
    try:
        QuenchConfig(v["quench.p"], v["quench.q"], v["quench.c"])
    except DomainError as exc:
        bad.append(("A2_violation", str(exc)))
    try:
        problem = build_problem(cfg)
    except (ConfigError, GridError, DomainError, ValueError) as exc:
        raise ValidationError(bad + [("config_violation", str(exc))]) from exc
    g, tg = problem.model.grid, problem.model.time
    bad += problem.bounds.violations()
    bad += problem.initial.violations(g)
    bad += problem.cost.violations(g, tg)
    if v["quench.anchor"] == "fixed" and v["quench.anchor_file"]:
        if not (cfg.base_dir / v["quench.anchor_file"]).exists() and not Path(v["quench.anchor_file"]).exists():
            bad.append(("config_violation", f"anchor file {v['quench.anchor_file']} does not exist"))
    if bad:
        raise ValidationError(bad)
    return problem
