"""JSON scenario files: parsing, validation and construction of model inputs.

A scenario looks like::

    {
      "kind": "scalar-model",            # or "skt", "diagnostics-only"
      "name": "demo",
      "seed": 0,
      "grid": {"lower": [0, 0], "upper": [1, 1], "cells": [16, 16]},
      "time": {"t0": 0, "T": 1, "steps": 64},
      "params": {"alpha": 1, "lam": 1, "theta": 1, "Lambda": 2},
      "initial": {"u": {"profile": "bump", "amplitude": 0.5}},
      "forcing": {"profile": "constant", "value": 0.0},
      "coefficient": {"kind": "identity"},
      "picard": {"max_iterations": 200, "l2_tolerance": 1e-9},
      "diagnostics": ["energy", "estimate_ratio"],
      "options": {"p": 4},
      "write_fields": true
    }

Initial data and forcing use named profiles: ``constant``, ``bump``,
``checkerboard``, ``linear`` and ``random`` (uniform, seeded).
"""
from __future__ import annotations

import copy
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .fixedpoint import ModelParams, PicardConfig
from .mesh import Field, Grid, SpaceTimeField, TensorField, TimeAxis
from .skt import SKTParams

KINDS = ("scalar-model", "skt", "diagnostics-only")
PROFILES = ("constant", "bump", "checkerboard", "linear", "random")

DIAGNOSTICS = {
    "scalar-model": ("energy", "weak_residual", "estimate_ratio", "bmo", "maximal", "level_set_sum",
                     "lp_norms", "degiorgi"),
    "skt": ("v_bound", "blowup_monitor", "gradient_ratio", "mass", "lp_norms"),
    "diagnostics-only": ("lp_norms", "maximal", "level_set_sum", "degiorgi", "w1infty"),
}


class ConfigError(ValueError):
    pass


def load_json(path) -> dict:
    """Parse a JSON file, reporting the offending line on syntax errors."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}") from None


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing '{key}'")
    return d[key]


def _num(x, where: str) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {x!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return v


def build_grid(spec: dict) -> Grid:
    try:
        return Grid(tuple(map(float, _need(spec, "lower", "grid"))),
                    tuple(map(float, _need(spec, "upper", "grid"))),
                    tuple(int(c) for c in _need(spec, "cells", "grid")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from None


def build_axis(spec: dict) -> TimeAxis:
    try:
        return TimeAxis(_num(spec.get("t0", 0.0), "time.t0"), _num(_need(spec, "T", "time"), "time.T"),
                        int(_need(spec, "steps", "time")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"time: {exc}") from None


def profile_values(grid: Grid, spec, where: str, scenario_seed: int = 0) -> np.ndarray:
    """Cell values of a named profile."""
    if isinstance(spec, (int, float)):
        return np.full(grid.shape, float(spec))
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: profile must be an object or a number")
    kind = spec.get("profile")
    if kind not in PROFILES:
        raise ConfigError(f"{where}: unknown profile {kind!r} (expected one of {', '.join(PROFILES)})")
    X = grid.centers
    if kind == "constant":
        return np.full(grid.shape, _num(spec.get("value", 0.0), where + ".value"))
    if kind == "bump":
        amp = _num(spec.get("amplitude", 1.0), where + ".amplitude")
        base = _num(spec.get("base", 0.0), where + ".base")
        width = _num(spec.get("width", 0.25), where + ".width")
        mid = [0.5 * (a + b) for a, b in zip(grid.lower, grid.upper)]
        center = spec.get("center", mid)
        if len(center) != grid.dim:
            raise ConfigError(f"{where}.center: wrong dimension")
        d2 = sum((x - c) ** 2 for x, c in zip(X, center))
        return base + amp * np.exp(-d2 / (2 * width ** 2))
    if kind == "checkerboard":
        lo = _num(spec.get("low", 0.0), where + ".low")
        hi = _num(spec.get("high", 1.0), where + ".high")
        block = int(spec.get("block", 1))
        if block < 1:
            raise ConfigError(f"{where}.block: must be positive")
        idx = sum(i // block for i in np.indices(grid.shape))
        return np.where(idx % 2 == 0, lo, hi).astype(float)
    if kind == "linear":
        slope = spec.get("slope", [1.0] + [0.0] * (grid.dim - 1))
        if len(slope) != grid.dim:
            raise ConfigError(f"{where}.slope: wrong dimension")
        off = _num(spec.get("offset", 0.0), where + ".offset")
        return off + sum(float(s) * x for s, x in zip(slope, X))
    # random
    lo = _num(spec.get("low", 0.0), where + ".low")
    hi = _num(spec.get("high", 1.0), where + ".high")
    if hi < lo:
        raise ConfigError(f"{where}: high < low")
    seed = int(spec.get("seed", 0))
    rng = np.random.default_rng([int(scenario_seed), seed])
    return rng.uniform(lo, hi, grid.shape)


def build_coefficient(grid: Grid, spec: dict | None, Lambda: float, seed: int) -> TensorField:
    spec = spec or {"kind": "identity"}
    kind = spec.get("kind", "identity")
    if kind == "identity":
        A = TensorField.identity(grid)
    elif kind == "isotropic":
        A = TensorField.isotropic(grid, profile_values(grid, _need(spec, "profile", "coefficient"),
                                                       "coefficient.profile", seed))
    elif kind == "oscillatory":
        amp = _num(spec.get("amplitude", 0.0), "coefficient.amplitude")
        period = _num(spec.get("period", 0.25), "coefficient.period")
        X = grid.centers
        wave = np.prod([np.sin(2 * np.pi * x / period) for x in X], axis=0)
        A = TensorField.isotropic(grid, 1.0 + amp * wave)
    else:
        raise ConfigError(f"coefficient: unknown kind {kind!r}")
    if not A.is_elliptic(Lambda):
        raise ConfigError(f"coefficient: eigenvalues leave [1/Lambda, Lambda] with Lambda={Lambda}")
    return A


def validate(cfg: dict, seed_override: int | None = None) -> dict:
    """Check a scenario and return its normalised form (defaults filled in)."""
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a JSON object")
    cfg = copy.deepcopy(cfg)
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    cfg.setdefault("seed", 0)
    cfg.setdefault("name", kind)
    diags = cfg.setdefault("diagnostics", [])
    if len(set(diags)) != len(diags):
        raise ConfigError("diagnostics: each diagnostic may be listed once")
    for d in diags:
        if d not in DIAGNOSTICS[kind]:
            raise ConfigError(f"diagnostics: {d!r} is not available for {kind} "
                              f"(choose from {', '.join(DIAGNOSTICS[kind])})")
    cfg.setdefault("options", {})
    cfg.setdefault("write_fields", True)
    if kind == "diagnostics-only":
        fields = _need(cfg, "fields", "scenario")
        if not isinstance(fields, dict) or not fields:
            raise ConfigError("fields: expected a non-empty mapping of name -> sidecar path")
        return cfg
    grid = build_grid(_need(cfg, "grid", "scenario"))
    build_axis(_need(cfg, "time", "scenario"))
    params = cfg.setdefault("params", {})
    try:
        if kind == "scalar-model":
            p = ModelParams(**{k: float(v) for k, v in params.items()})
            cfg["params"] = {"alpha": p.alpha, "lam": p.lam, "theta": p.theta, "Lambda": p.Lambda}
            PicardConfig(**cfg.setdefault("picard", {}))
            build_coefficient(grid, cfg.setdefault("coefficient", {"kind": "identity"}), p.Lambda, cfg["seed"])
        else:
            if float(params.get("a21", 0.0)) != 0.0:
                warnings.warn("a21 is not supported by the restricted system and is ignored", stacklevel=2)
            p = SKTParams.from_dict(params)
            cfg["params"] = p.to_dict() | ({"a21": params["a21"]} if "a21" in params else {})
    except TypeError as exc:
        raise ConfigError(f"params: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"params: {exc}") from None
    initial = cfg.setdefault("initial", {})
    needed = ("u",) if kind == "scalar-model" else ("u", "v")
    for name in needed:
        if name not in initial:
            raise ConfigError(f"initial: missing '{name}'")
        profile_values(grid, initial[name], f"initial.{name}", cfg["seed"])
    if kind == "scalar-model":
        profile_values(grid, cfg.setdefault("forcing", {"profile": "constant", "value": 0.0}), "forcing",
                       cfg["seed"])
    return cfg


def scalar_inputs(cfg: dict):
    grid = build_grid(cfg["grid"])
    axis = build_axis(cfg["time"])
    params = ModelParams(**cfg["params"])
    seed = cfg["seed"]
    u0 = profile_values(grid, cfg["initial"]["u"], "initial.u", seed)
    if u0.min() < 0 or params.lam * u0.max() > 1 + 1e-10:
        raise ConfigError("initial.u: values must satisfy 0 <= lam*u <= 1")
    c = profile_values(grid, cfg["forcing"], "forcing", seed)
    if c.min() < 0:
        raise ConfigError("forcing: c must be non-negative")
    A = build_coefficient(grid, cfg["coefficient"], params.Lambda, seed)
    c_field = SpaceTimeField(grid, axis, np.broadcast_to(c, (axis.steps + 1,) + grid.shape))
    return grid, axis, params, A, c_field, Field(grid, u0), PicardConfig(**cfg["picard"])


def skt_inputs(cfg: dict):
    grid = build_grid(cfg["grid"])
    axis = build_axis(cfg["time"])
    params = SKTParams.from_dict(cfg["params"])
    seed = cfg["seed"]
    u0 = profile_values(grid, cfg["initial"]["u"], "initial.u", seed)
    v0 = profile_values(grid, cfg["initial"]["v"], "initial.v", seed)
    if u0.min() < 0 or v0.min() < 0:
        raise ConfigError("initial: data must be non-negative")
    return grid, axis, params, Field(grid, u0), Field(grid, v0)


def set_path(cfg: dict, dotted: str, value) -> None:
    """``set_path(cfg, "params.theta", 0.5)`` sets ``cfg["params"]["theta"]``."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep axis {dotted!r} passes through a non-object")
    node[keys[-1]] = value
