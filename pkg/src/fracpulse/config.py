"""Run configuration shared by every command-line subcommand.

A :class:`RunConfig` is a flat, frozen record whose fields are plain SI
numbers, strings and tuples. It round-trips through JSON; physical
fields read from a file or from flags may carry unit suffixes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .noise import VARIANTS, FbmModel, TlfEnsembleModel, p0_from_r0
from .shapes import DeviceParams, GateSpec, make_shape
from .units import UnitError, parse_quantity

SWEEP_AXES = ("T", "alpha", "shape", "R0", "width", "dt", "dtau", "f")
CATALOG = ("square", "gaussian", "exp-of-gaussian", "beta")
SHAPE_ALIASES = {"optimal": "beta", "gaussian-voltage": "exp-of-gaussian"}
FORMATS = ("csv", "json")

_UNIT_FIELDS = {
    "r0": "voltage2",
    "f_min": "frequency",
    "f_max": "frequency",
    "v0": "voltage",
    "j0": "energy",
    "j_floor": "energy",
}
_SWEEP_UNITS = {"T": "time", "R0": "voltage2", "dt": "time", "f": "frequency"}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class Sweep:
    """One sweep axis: ``n`` points from ``start`` to ``stop`` on a ``log`` or ``linear`` scale.

    The ``shape`` axis takes its values from :attr:`RunConfig.shapes`.
    """

    axis: str
    start: float = 0.0
    stop: float = 0.0
    n: int = 1
    scale: str = "log"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {SWEEP_AXES}")
        if self.scale not in ("log", "linear"):
            raise ConfigError(f"sweep scale must be log or linear, got {self.scale!r}")
        if self.axis == "shape":
            return
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"empty sweep range: need at least one point, got n={self.n}")
        if self.stop < self.start or (self.n > 1 and self.stop == self.start):
            raise ConfigError(f"empty sweep range [{self.start}, {self.stop}] with {self.n} points")
        if self.scale == "log" and self.start <= 0:
            raise ConfigError("a log sweep needs a positive start")

    def values(self) -> np.ndarray:
        if self.n == 1:
            return np.array([float(self.start)])
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, int(self.n))
        return np.linspace(self.start, self.stop, int(self.n))


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one run.

    Units: ``r0`` in V^2, ``p0`` in V^2 Hz^(alpha-1), frequencies in Hz,
    ``durations`` in s, ``v0`` in V, ``j0`` and ``j_floor`` in eV,
    ``kappa`` in 1/V. ``alphas`` and ``durations`` list the curves drawn
    along the sweep axis; single-point commands use their first entries.
    """

    noise: str = "tlf"
    r0: float = 1e-6
    p0: float | None = None
    f_min: float = 1e4
    f_max: float = 1e10
    alphas: tuple = (1.0,)
    durations: tuple = (10e-9,)
    k: float = 1.0
    v0: float = 0.04
    j0: float = 0.01e-6
    kappa: float = 80.0
    j_floor: float | None = None
    shapes: tuple = ("square",)
    sigma: float = 0.12
    h: float = 10.0
    kernel: str = "exact"
    variants: tuple = ()
    grid_n: int = 16
    sweep: Sweep | None = None
    normalized: bool = True
    n_samples: int = 1001
    max_iter: int = 200
    tol: float = 1e-10
    opt_nodes: int = 128
    n_traj: int = 10000
    seed: int = 0
    n_t: int = 4096
    n_bins: int = 64
    out: str | None = None
    format: str | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.noise not in ("tlf", "fbm"):
            raise ConfigError(f"noise must be tlf or fbm, got {self.noise!r}")
        if not self.alphas or not self.durations or not self.shapes:
            raise ConfigError("alphas, durations and shapes must be non-empty")
        for name in self.shapes:
            if canonical_shape(name) not in CATALOG:
                raise ConfigError(f"unknown shape {name!r}; choose from {CATALOG + tuple(SHAPE_ALIASES)}")
        for v in (self.kernel,) + tuple(self.variants):
            if v not in VARIANTS:
                raise ConfigError(f"unknown kernel {v!r}; choose from {VARIANTS}")
        if (self.kernel == "fbm") != (self.noise == "fbm"):
            raise ConfigError("the fbm kernel goes with noise='fbm' and only with it")
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        for name in ("grid_n", "n_samples", "opt_nodes", "n_traj", "n_t", "n_bins", "max_iter"):
            if getattr(self, name) < 0 or int(getattr(self, name)) != getattr(self, name):
                raise ConfigError(f"{name} must be a nonnegative integer")
        if self.grid_n < 2 or self.n_traj < 1:
            raise ConfigError("grid_n must be at least 2 and n_traj at least 1")
        # build every model once so type invariants are checked up front
        try:
            for alpha in self.alphas:
                self.model(alpha)
            for T in self.durations:
                self.gate(T)
            self.device()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def model(self, alpha: float | None = None, T: float | None = None, r0: float | None = None):
        alpha = self.alphas[0] if alpha is None else float(alpha)
        r0 = self.r0 if r0 is None else float(r0)
        if self.noise == "fbm":
            p0 = self.p0
            if p0 is None:
                p0 = p0_from_r0(TlfEnsembleModel(r0, self.f_min, self.f_max, alpha))
            return FbmModel(p0, alpha, self.durations[0] if T is None else float(T))
        return TlfEnsembleModel(r0, self.f_min, self.f_max, alpha)

    def gate(self, T: float | None = None) -> GateSpec:
        return GateSpec(self.k, self.durations[0] if T is None else float(T))

    def device(self) -> DeviceParams:
        return DeviceParams(self.v0, self.j0, self.kappa)

    def shape(self, name: str, alpha: float | None = None):
        variant = canonical_shape(name)
        if variant == "beta":
            return make_shape("beta", alpha=self.alphas[0] if alpha is None else alpha)
        if variant in ("gaussian", "exp-of-gaussian"):
            params = {"sigma": self.sigma} | ({"h": self.h} if variant == "exp-of-gaussian" else {})
            return make_shape(variant, **params)
        return make_shape(variant)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, tuple):
                out[key] = list(val)
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(**coerce(data))

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(read_config_file(path))

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **coerce(changes))


def read_config_file(path) -> dict:
    """Raw field values stored in a JSON config file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def canonical_shape(name: str) -> str:
    return SHAPE_ALIASES.get(name, name)


def coerce(data: dict) -> dict:
    """Field values with units parsed, lists turned into tuples and the sweep built."""
    names = {f.name for f in fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    out = {}
    try:
        for key, val in data.items():
            if key in _UNIT_FIELDS and val is not None:
                val = parse_quantity(val, _UNIT_FIELDS[key])
            elif key == "durations":
                val = tuple(parse_quantity(v, "time") for v in _as_list(val))
            elif key == "alphas":
                val = tuple(float(v) for v in _as_list(val))
            elif key in ("shapes", "variants"):
                val = tuple(_as_list(val))
            elif key == "sweep" and isinstance(val, dict):
                val = _sweep_from_dict(val)
            out[key] = val
    except (UnitError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return out


def _as_list(val):
    return list(val) if isinstance(val, (list, tuple)) else [val]


def _sweep_from_dict(data: dict) -> Sweep:
    data = dict(data)
    unit = _SWEEP_UNITS.get(data.get("axis"))
    if unit:
        for key in ("start", "stop"):
            if key in data:
                data[key] = parse_quantity(data[key], unit)
    try:
        return Sweep(**data)
    except TypeError as exc:
        raise ConfigError(f"bad sweep specification: {exc}") from exc

