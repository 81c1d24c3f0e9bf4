"""Experiment configuration: JSON schema, validation and the canonical preset.

A configuration is a single JSON object. Unknown keys are rejected, every
tolerance must be positive and the seed is mandatory, so that a config file
fully determines a run.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import FourierFunction, from_descriptor
from .bumps import BumpSpec
from .cutproject import BOUNDARY_POLICIES, CutProjectScheme, Window

CHECKS = ("modelset", "poisson", "bracket", "frame", "tight", "dual", "gabor-wr", "density")

CANONICAL = {
    "scheme": {"alpha": math.sqrt(2.0), "beta": math.sqrt(3.0), "m": 1},
    "window": {"half_width": 1.0, "boundary": "open"},
    "bump": {"epsilon": 0.5, "n": 2, "S": 40},
    "grids": {
        "t_grid": {"start": -2.0, "stop": 2.0, "num": 101},
        "x_grid": {"start": -4.0, "stop": 4.0, "num": 81},
        "R_schedule": [250.0, 500.0, 1000.0, 2000.0],
        "density_radii": [100.0, 1000.0, 10000.0],
    },
    "truncations": {
        "P": [500.0, 1000.0, 2000.0, 4000.0, 8000.0],
        "patch_radius": 50.0,
        "weight_floor": 1e-10,
        "trials": 50,
        "shifts": 20,
    },
    "tolerances": {
        "modelset": 1e-9,
        "poisson": 1e-6,
        "bracket": 1e-2,
        "frame": 1e-3,
        "covariance": 1e-8,
        "bessel": 1e-2,
        "tight": 1e-3,
        "dual": 1e-3,
        "gabor_wr": 1e-6,
        "density": 1e-2,
    },
    "seed": 0,
    "generators": [
        {"role": "f", "kind": "smooth_cutoff_gaussian", "width": 1.0, "cutoff": 1.0},
        {"role": "g", "kind": "gaussian", "amplitude": 1.0, "width": 1.0},
        {"role": "h", "kind": "gaussian", "amplitude": 1.0, "width": 0.7},
    ],
    "gabor": {"A": [[3.0]], "L": 1, "beta_radius": None},
}

PRESETS = {"canonical": CANONICAL}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
        self.message = message


# ------------------------------------------------------------------ schema


def _number(path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be >= 0, got {v!r}")
    return float(v)


def _integer(path, v, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v!r}")
    return v


def _object(path, v, allowed, required=()):
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected an object, got {type(v).__name__}")
    for k in v:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, f"unknown key (allowed: {', '.join(sorted(allowed))})")
    for k in required:
        if k not in v:
            raise ConfigError(f"{path}.{k}" if path else k, "missing required key")
    return v


def _increasing(path, v, positive=True):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list of numbers")
    out = [_number(f"{path}[{i}]", x, positive=positive) for i, x in enumerate(v)]
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(path, "must be strictly increasing")
    return out


def _grid(path, v):
    _object(path, v, {"start", "stop", "num"}, ("start", "stop", "num"))
    a, b = _number(f"{path}.start", v["start"]), _number(f"{path}.stop", v["stop"])
    _integer(f"{path}.num", v["num"], 1)
    if b < a:
        raise ConfigError(path, "stop must be >= start")


TOP = ("scheme", "window", "bump", "grids", "truncations", "tolerances", "seed", "generators", "gabor")


def validate(cfg: dict) -> None:
    """Raise :class:`ConfigError` naming the first offending field."""
    _object("", cfg, set(TOP), TOP)
    s = _object("scheme", cfg["scheme"], {"alpha", "beta", "m"}, ("alpha", "beta", "m"))
    _number("scheme.alpha", s["alpha"], positive=True)
    _number("scheme.beta", s["beta"], positive=True)
    if _integer("scheme.m", s["m"], 1) != 1:
        raise ConfigError("scheme.m", "only m = 1 is supported")

    w = _object("window", cfg["window"], {"half_width", "boundary"}, ("half_width",))
    _number("window.half_width", w["half_width"], positive=True)
    if w.get("boundary", "open") not in BOUNDARY_POLICIES:
        raise ConfigError("window.boundary", f"must be one of {BOUNDARY_POLICIES}")

    b = _object("bump", cfg["bump"], {"epsilon", "n", "S"}, ("epsilon", "n"))
    eps = _number("bump.epsilon", b["epsilon"])
    if not 0 < eps < 1:
        raise ConfigError("bump.epsilon", f"must lie in (0, 1), got {eps!r}")
    _integer("bump.n", b["n"], 1)
    if "S" in b:
        _integer("bump.S", b["S"], 1)

    g = _object("grids", cfg["grids"], {"t_grid", "x_grid", "R_schedule", "density_radii"}, ("t_grid", "x_grid", "R_schedule", "density_radii"))
    _grid("grids.t_grid", g["t_grid"])
    _grid("grids.x_grid", g["x_grid"])
    _increasing("grids.R_schedule", g["R_schedule"])
    if len(_increasing("grids.density_radii", g["density_radii"])) < 3:
        raise ConfigError("grids.density_radii", "needs at least 3 radii")

    t = _object("truncations", cfg["truncations"], {"P", "patch_radius", "weight_floor", "trials", "shifts"}, ("P", "patch_radius", "weight_floor", "trials", "shifts"))
    _increasing("truncations.P", t["P"])
    _number("truncations.patch_radius", t["patch_radius"], positive=True)
    _number("truncations.weight_floor", t["weight_floor"], nonneg=True)
    _integer("truncations.trials", t["trials"], 1)
    _integer("truncations.shifts", t["shifts"], 1)

    tol_keys = {c.replace("-", "_") for c in CHECKS} | {"covariance", "bessel"}
    tol = _object("tolerances", cfg["tolerances"], tol_keys, tuple(sorted(tol_keys)))
    for k, v in tol.items():
        _number(f"tolerances.{k}", v, positive=True)

    if cfg["seed"] is None:
        raise ConfigError("seed", "a seed is required for deterministic runs")
    _integer("seed", cfg["seed"], 0)

    gens = cfg["generators"]
    if not isinstance(gens, list):
        raise ConfigError("generators", "expected a list of function descriptors")
    for i, d in enumerate(gens):
        path = f"generators[{i}]"
        if not isinstance(d, dict) or "role" not in d or "kind" not in d:
            raise ConfigError(path, "descriptor needs 'role' and 'kind'")
        if d["role"] not in ("f", "g", "h"):
            raise ConfigError(f"{path}.role", "must be 'f', 'g' or 'h'")
        try:
            from_descriptor({k: v for k, v in d.items() if k != "role"})
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(path, str(exc)) from None
    for role in ("f", "g"):
        if not any(d["role"] == role for d in gens):
            raise ConfigError("generators", f"at least one generator with role {role!r} is required")
    n_g = sum(d["role"] == "g" for d in gens)
    n_h = sum(d["role"] == "h" for d in gens)
    if n_h and n_h != n_g:
        raise ConfigError("generators", f"{n_g} 'g' but {n_h} 'h' generators; partners must pair up")

    gb = _object("gabor", cfg["gabor"], {"A", "L", "beta_radius"}, ("A", "L"))
    A = gb["A"]
    if not (isinstance(A, list) and len(A) == 1 and isinstance(A[0], list) and len(A[0]) == 1):
        raise ConfigError("gabor.A", "expected a 1x1 matrix such as [[3.0]]")
    if _number("gabor.A[0][0]", A[0][0]) == 0:
        raise ConfigError("gabor.A", "must be invertible")
    L = _integer("gabor.L", gb["L"], 1)
    if L > n_g:
        raise ConfigError("gabor.L", f"needs {L} 'g' generators, config has {n_g}")
    if gb.get("beta_radius") is not None:
        _number("gabor.beta_radius", gb["beta_radius"], positive=True)


# ----------------------------------------------------------------- loading


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    """Apply ``a.b.c=VALUE`` in place; ``VALUE`` is read as JSON when it parses."""
    if "=" not in item:
        raise ConfigError("--override", f"expected KEY=VALUE, got {item!r}")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for i, p in enumerate(parts[:-1]):
        if isinstance(node, list):
            try:
                node = node[int(p)]
                continue
            except (ValueError, IndexError):
                raise ConfigError(".".join(parts[: i + 1]), "not a valid list index") from None
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(".".join(parts[: i + 1]), "unknown key")
        node = node[p]
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = _parse_value(text)
        except (ValueError, IndexError):
            raise ConfigError(key, "not a valid list index") from None
    elif isinstance(node, dict):
        node[last] = _parse_value(text)
    else:
        raise ConfigError(key, "cannot override inside a scalar")


def load_raw(source: str | Path | None) -> dict:
    """Parse a config file, or return a copy of a named preset.

    Raises
    ------
    ConfigError
        With ``field`` set to ``"<path>:<line>:<col>"`` on a JSON syntax error.
    """
    if source is None:
        return copy.deepcopy(CANONICAL)
    if str(source) in PRESETS:
        return copy.deepcopy(PRESETS[str(source)])
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2)


# ------------------------------------------------------------ typed access


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with typed accessors; ``raw`` is the echo."""

    raw: dict

    @classmethod
    def load(cls, source=None, overrides=()) -> "ExperimentConfig":
        cfg = load_raw(source)
        for item in overrides:
            apply_override(cfg, item)
        return cls.from_dict(cfg)

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        validate(cfg)
        # round trip so the echo is exactly what a reader of report.json sees
        return cls(json.loads(dumps(cfg)))

    def dumps(self) -> str:
        return dumps(self.raw)

    @property
    def scheme(self) -> CutProjectScheme:
        s = self.raw["scheme"]
        return CutProjectScheme.from_alpha_beta(s["alpha"], s["beta"])

    @property
    def window(self) -> Window:
        w = self.raw["window"]
        return Window(float(w["half_width"]), w.get("boundary", "open"))

    @property
    def bump(self) -> BumpSpec:
        b = self.raw["bump"]
        return BumpSpec(self.window, float(b["epsilon"]), int(b["n"]), int(b.get("S", 40)))

    def grid(self, name: str) -> np.ndarray:
        g = self.raw["grids"][name]
        return np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))

    @property
    def R_schedule(self) -> tuple:
        return tuple(float(r) for r in self.raw["grids"]["R_schedule"])

    @property
    def density_radii(self) -> tuple:
        return tuple(float(r) for r in self.raw["grids"]["density_radii"])

    @property
    def truncations(self) -> dict:
        return self.raw["truncations"]

    def tolerance(self, check: str) -> float:
        return float(self.raw["tolerances"][check.replace("-", "_")])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def generators(self, role: str) -> list[FourierFunction]:
        return [from_descriptor({k: v for k, v in d.items() if k != "role"}) for d in self.raw["generators"] if d["role"] == role]

    @property
    def gabor(self) -> dict:
        return self.raw["gabor"]
