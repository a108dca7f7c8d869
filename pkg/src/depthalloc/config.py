"""Run configuration: strict YAML/JSON loading, canonical serialization and hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from dataclasses import dataclass, field

import yaml

from . import optics
from .binocular import DEFAULT_IPD_TABLE_MM
from .errors import ConfigError

WEIGHT_MODES = ("measure", "profile-scale")
ENGINES = ("highs", "simplex")


@dataclass
class GridConfig:
    depth_cols: typing.Optional[int] = None  # None: aligned with the knoll spacing
    age_lo: float = 10.0
    age_hi: float = 70.0
    height_bins: int = 128


@dataclass
class AccommodationConfig:
    amplitude_max: float = optics.DEFAULT_AMPLITUDE_MAX
    midpoint_age: float = optics.DEFAULT_MIDPOINT_AGE
    slope: float = optics.DEFAULT_SLOPE
    amplitude_min: float = optics.DEFAULT_AMPLITUDE_MIN
    rest_offset_d: float = 0.0


@dataclass
class AgeConfig:
    kind: str = "uniform"  # uniform | gamma | table
    k: float = 3.0
    theta: float = 10.0
    table_path: typing.Optional[str] = None  # None with kind=table: bundled census table


@dataclass
class DepthConfig:
    kind: str = "none"  # none | gaussian_diopter | gaussian_depth
    mean: float = 0.0
    sd: float = 1.0


@dataclass
class IntrinsicConfig:
    reference_age: float = 10.0
    step_pupil_mm: float = 6.0
    z_stop_m: float = 10.0


@dataclass
class SolverConfig:
    engine: str = "highs"
    timeout_s: typing.Optional[float] = None
    t_max: int = 9


@dataclass
class MonocularConfig:
    ages: typing.Tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0)
    pupils: typing.Tuple[float, ...] = (2.0, 3.0, 6.0)
    z_stop_m: float = 10.0


@dataclass
class BinocularConfig:
    ipd_mm: float = 64.0
    acuity_arcmin: float = 0.5
    z_start_m: float = 0.25
    z_stop_m: float = 15.0
    vernier_floor_um: float = 100.0
    apply_floor: bool = False
    fixation_m: typing.Tuple[float, ...] = (0.4, 1.29, 2.37, 4.5, 7.3)
    H: typing.Optional[float] = None  # None: fitted from the measured table
    x_samples: int = 201
    ipd_table_mm: typing.Tuple[float, ...] = DEFAULT_IPD_TABLE_MM


def _default_fwhm():
    return {_pupil_key(k): v for k, v in optics.DEFAULT_FWHM.items()}


def _pupil_key(k) -> str:
    try:
        return f"{float(k):g}"
    except (TypeError, ValueError):
        raise ConfigError(f"dof_fwhm key {k!r} is not a pupil diameter") from None


@dataclass
class RunConfig:
    scenario_name: str = "custom"
    pupil_mm: float = 3.0
    d_min: float = 0.5
    d_max: float = 7.08
    spacing_d: float = 0.044
    dof_fwhm: typing.Dict[str, float] = field(default_factory=_default_fwhm)
    weight_mode: str = "measure"
    grid: GridConfig = field(default_factory=GridConfig)
    accommodation: AccommodationConfig = field(default_factory=AccommodationConfig)
    age: AgeConfig = field(default_factory=AgeConfig)
    depth: DepthConfig = field(default_factory=DepthConfig)
    intrinsic: IntrinsicConfig = field(default_factory=IntrinsicConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    monocular: MonocularConfig = field(default_factory=MonocularConfig)
    binocular: BinocularConfig = field(default_factory=BinocularConfig)
    output_dir: str = "out"
    seed: int = 0

    def validate(self) -> "RunConfig":
        if not 0 < self.d_min < self.d_max:
            raise ConfigError("need 0 < d_min < d_max")
        if not self.spacing_d > 0:
            raise ConfigError("spacing_d must be positive")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.solver.engine not in ENGINES:
            raise ConfigError(f"solver.engine must be one of {ENGINES}")
        if self.solver.t_max < 1:
            raise ConfigError("solver.t_max must be >= 1")
        if self.solver.timeout_s is not None and not self.solver.timeout_s > 0:
            raise ConfigError("solver.timeout_s must be positive")
        if self.grid.height_bins < 1:
            raise ConfigError("grid.height_bins must be >= 1")
        if self.grid.depth_cols is not None and self.grid.depth_cols < 2:
            raise ConfigError("grid.depth_cols must be >= 2")
        if not self.grid.age_lo < self.grid.age_hi:
            raise ConfigError("grid.age_lo must be below grid.age_hi")
        if self.age.kind not in ("uniform", "gamma", "table"):
            raise ConfigError(f"unknown age.kind {self.age.kind!r}")
        if self.depth.kind not in ("none", "gaussian_diopter", "gaussian_depth"):
            raise ConfigError(f"unknown depth.kind {self.depth.kind!r}")
        if self.binocular.x_samples < 1:
            raise ConfigError("binocular.x_samples must be >= 1")
        for name in ("ipd_mm", "acuity_arcmin", "z_start_m", "z_stop_m"):
            if not getattr(self.binocular, name) > 0:
                raise ConfigError(f"binocular.{name} must be positive")
        if any(not z > 0 for z in self.binocular.fixation_m):
            raise ConfigError("binocular.fixation_m values must be positive")
        for k, v in self.dof_fwhm.items():
            if not v > 0:
                raise ConfigError(f"dof_fwhm[{k}] must be positive")
        return self

    # -- derived model objects

    def accommodation_model(self) -> optics.AccommodationModel:
        a = self.accommodation
        return optics.AccommodationModel(a.amplitude_max, a.midpoint_age, a.slope, a.amplitude_min,
                                         a.rest_offset_d)

    def dof_table(self) -> optics.DofTable:
        return optics.DofTable({float(k): float(v) for k, v in self.dof_fwhm.items()})

    # -- serialization

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        """sha256 of the canonical JSON form, with location-only fields left out.

        ``output_dir`` does not affect results and an external age table is hashed
        by content, so the digest does not depend on where files live.
        """
        d = self.to_dict()
        d.pop("output_dir")
        tp = d["age"].pop("table_path")
        if tp is not None:
            with open(tp, "rb") as fh:
                d["age"]["table_sha256"] = hashlib.sha256(fh.read()).hexdigest()
        blob = json.dumps(_jsonable(d), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        return from_dict(merge(self.to_dict(), changes))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _coerce(tp, value, where):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:  # Optional[X]
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(inner, value, where)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return _build(tp, value, where)
    if origin is tuple:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_coerce(args[0], v, f"{where}[{i}]") for i, v in enumerate(value))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping")
        return {_pupil_key(k): _coerce(float, v, f"{where}.{k}") for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{where}: expected an integer")
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    raise ConfigError(f"{where}: unsupported field type")  # pragma: no cover


def _build(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError("unknown config key(s): " + ", ".join(prefix + str(k) for k in unknown))
    kwargs = {}
    for name, value in data.items():
        key = f"{where}.{name}" if where else name
        kwargs[name] = _coerce(hints[name], value, key)
    return cls(**kwargs)


def merge(base: dict, override: dict) -> dict:
    """Recursive dict update; nested mappings merge, everything else replaces."""
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "dof_fwhm":
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    return _build(RunConfig, data, "").validate()


def parse_text(text: str) -> dict:
    try:
        data = yaml.safe_load(text)  # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    return data


def resolve_paths(cfg: RunConfig, base_dir) -> RunConfig:
    """Make relative paths absolute with respect to ``base_dir``."""
    def fix(p):
        return p if p is None or os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    cfg.output_dir = fix(cfg.output_dir)
    cfg.age.table_path = fix(cfg.age.table_path)
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a YAML or JSON file. Paths inside resolve against the file's directory."""
    with open(path) as fh:
        data = parse_text(fh.read())
    if overrides:
        data = merge(data, overrides)
    cfg = from_dict(data)
    return resolve_paths(cfg, os.path.dirname(os.path.abspath(path)))


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(_jsonable(cfg.to_dict()), sort_keys=True)
