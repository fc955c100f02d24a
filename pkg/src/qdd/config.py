"""Run configuration files and shipped presets.

Configs are TOML with the sections ``[model]``, ``[grid]``, ``[initial]``,
``[scheme]`` and ``[io]`` plus a top-level ``seed``. Every key has a
default (see :data:`DEFAULTS`); unknown keys are rejected.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .elliptic import NewtonConfig
from .errors import ConfigError
from .grid import DensityState, Grid, build_grid
from .scheme import ModelParams, StepConfig

DEFAULTS = {
    "seed": 0,
    "model": {"eps": 0.1, "sigma": 0.0, "doping": "none"},
    "grid": {"d": 1, "geometry": "slab", "N": 201, "L": 1.0},
    "initial": {"profile": "cosine"},
    "scheme": {
        "tau": 1e-4,
        "T": 0.1,
        "method": "newton",
        "picard_max": 200,
        "picard_tol": 1e-8,
        "relaxation": 1.0,
        "continuation": [0.25, 0.5, 0.75, 1.0],
        "max_halvings": 10,
        "newton_max_iter": 50,
        "newton_tol": 1e-11,
    },
    "io": {"out": "qdd-out", "snapshot_every": 0},
}

DOC = {
    "seed": "master seed (recorded; the time stepper itself is deterministic)",
    "model.eps": "scaled Planck constant, > 0",
    "model.sigma": "interaction strength; a number or a string such as '16pi'",
    "model.doping": "doping profile id: 'none' or 'uniform' (C = 1/|Omega|)",
    "grid.d": "dimension: 1 for slab, 2 or 3 for radial",
    "grid.geometry": "'slab' or 'radial'",
    "grid.N": "number of nodes including both ends",
    "grid.L": "slab length or ball radius",
    "initial.profile": "initial profile id from presets/profiles.toml",
    "scheme.tau": "nominal time step",
    "scheme.T": "final time",
    "scheme.method": "'newton' (coupled) or 'picard' (successive substitution)",
    "scheme.picard_max": "Picard sweep limit",
    "scheme.picard_tol": "sup-norm tolerance on the fixed-point defect",
    "scheme.relaxation": "initial Picard relaxation in (0, 1]",
    "scheme.continuation": "lambda ladder tried when the direct solve fails",
    "scheme.max_halvings": "step halvings before a run is declared failed",
    "scheme.newton_max_iter": "iteration cap of the y-equation Newton solve",
    "scheme.newton_tol": "residual tolerance of the y-equation Newton solve",
    "io.out": "output directory",
    "io.snapshot_every": "write every k-th state (0: first and last only)",
}

_SIGMA_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


def parse_sigma(value) -> float:
    """Accept numbers and strings like ``'16pi'``, ``'-4*pi'`` or ``'pi'``."""
    if isinstance(value, bool):
        raise ConfigError("model.sigma must be a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _SIGMA_RE.match(value)
        if m:
            coef = m.group(1)
            return (float(coef) if coef not in (None, "+", "-") else 1.0) * math.pi
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"model.sigma: cannot parse {value!r}")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be a section")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


@dataclass
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls(_merge(DEFAULTS, data))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        return cls.from_dict(data)

    def section(self, name: str) -> dict:
        return self.raw[name]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def validate(self) -> None:
        m, s, io = self.raw["model"], self.raw["scheme"], self.raw["io"]
        if not isinstance(m["eps"], (int, float)) or not m["eps"] > 0:
            raise ConfigError(f"model.eps must be > 0, got {m['eps']!r}")
        parse_sigma(m["sigma"])
        if m["doping"] not in ("none", "uniform"):
            raise ConfigError(f"model.doping: unknown profile {m['doping']!r}")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        if self.raw["initial"]["profile"] not in load_profiles():
            raise ConfigError(f"initial.profile: unknown preset {self.raw['initial']['profile']!r}")
        for key in ("tau", "T"):
            if not isinstance(s[key], (int, float)) or not s[key] > 0:
                raise ConfigError(f"scheme.{key} must be > 0, got {s[key]!r}")
        try:
            self.step_config()
        except ValueError as exc:
            raise ConfigError(f"scheme: {exc}") from exc
        if not isinstance(s["max_halvings"], int) or s["max_halvings"] < 0:
            raise ConfigError("scheme.max_halvings must be a nonnegative integer")
        if not isinstance(io["snapshot_every"], int) or io["snapshot_every"] < 0:
            raise ConfigError("io.snapshot_every must be a nonnegative integer")

    def grid(self) -> Grid:
        g = self.raw["grid"]
        if g["geometry"] not in ("slab", "radial"):
            raise ValueError(f"geometry must be 'slab' or 'radial', got {g['geometry']!r}")
        return build_grid(int(g["d"]), g["geometry"], int(g["N"]), float(g["L"]))

    def params(self, grid: Grid | None = None) -> ModelParams:
        m = self.raw["model"]
        grid = grid or self.grid()
        doping = None
        if m["doping"] == "uniform":
            doping = np.full(grid.N, 1.0 / grid.volume)
        return ModelParams(eps=float(m["eps"]), sigma=parse_sigma(m["sigma"]), doping=doping)

    def step_config(self) -> StepConfig:
        s = self.raw["scheme"]
        return StepConfig(
            tau=float(s["tau"]), method=s["method"], picard_max=int(s["picard_max"]),
            picard_tol=float(s["picard_tol"]), relaxation=float(s["relaxation"]),
            continuation=tuple(float(x) for x in s["continuation"]),
            newton=NewtonConfig(max_iter=int(s["newton_max_iter"]),
                                tol_residual=float(s["newton_tol"])),
        )

    def initial_state(self, grid: Grid | None = None) -> DensityState:
        grid = grid or self.grid()
        return make_profile(grid, self.raw["initial"]["profile"])


def _read_preset(name: str) -> dict:
    text = resources.files("qdd.presets").joinpath(name).read_text()
    return tomllib.loads(text)


def load_profiles() -> dict:
    return _read_preset("profiles.toml")


def load_experiments() -> dict:
    return _read_preset("experiments.toml")


def preset_config_text(name: str = "dlss.toml") -> str:
    return resources.files("qdd.presets").joinpath(name).read_text()


def profile_values(grid: Grid, profile_id: str) -> np.ndarray:
    profiles = load_profiles()
    if profile_id not in profiles:
        raise ConfigError(f"unknown profile {profile_id!r}")
    p = profiles[profile_id]
    s, L = grid.nodes, grid.L
    kind = p["kind"]
    if kind == "uniform":
        return np.ones(grid.N)
    if kind == "cosine":
        return 1.0 + p["amplitude"] * np.cos(np.pi * s / L)
    if kind == "gaussian":
        return np.exp(-s**2 / (2.0 * p["width"] ** 2))
    if kind == "raised-cosine-squared":
        return (1.0 + np.cos(np.pi * s / L)) ** 2
    if kind == "clipped-cosine":
        return np.maximum(np.cos(np.pi * s / L), 0.0)
    raise ConfigError(f"profile {profile_id!r} has unknown kind {kind!r}")


def make_profile(grid: Grid, profile_id: str) -> DensityState:
    """Unit-mass initial state for a shipped profile id."""
    return DensityState.from_density(grid, profile_values(grid, profile_id))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def dump_config(raw: dict, with_docs: bool = True) -> str:
    """TOML text for a config dictionary (sections after top-level keys)."""
    lines = []
    for key, val in raw.items():
        if not isinstance(val, dict):
            if with_docs and key in DOC:
                lines.append(f"# {DOC[key]}")
            lines.append(f"{key} = {_fmt(val)}")
    for key, val in raw.items():
        if isinstance(val, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for k, v in val.items():
                if with_docs and f"{key}.{k}" in DOC:
                    lines.append(f"# {DOC[key + '.' + k]}")
                lines.append(f"{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"
