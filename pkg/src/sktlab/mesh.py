"""Uniform cell-centred grids, space-time fields and parabolic cubes.

Everything here is immutable once built. Arrays stored on the field types are
flagged read-only so that the solvers can share them without copying.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# slack used when deciding whether a cell centre / slice time lies in a cube
MEMBERSHIP_EPS = 1e-9

_MAGIC = b"FLD1"
_VERSION = 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular mesh in one or two dimensions.

    ``lower``/``upper`` are the box corners and ``cells`` the number of cells per
    axis. Spacing is derived, so ``upper - lower == cells * h`` holds exactly up
    to rounding of the division.
    """

    lower: tuple
    upper: tuple
    cells: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        cells = tuple(int(v) for v in np.atleast_1d(self.cells))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "cells", cells)
        if not (len(lower) == len(upper) == len(cells)):
            raise ValueError("lower, upper and cells must have the same length")
        if len(cells) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if any(n < 2 for n in cells):
            raise ValueError("need at least 2 cells per axis")
        if any(not (b > a) for a, b in zip(lower, upper)):
            raise ValueError("upper must exceed lower on every axis")
        if not all(np.isfinite(lower + upper)):
            raise ValueError("grid extents must be finite")

    @classmethod
    def unit(cls, *cells: int) -> "Grid":
        return cls((0.0,) * len(cells), (1.0,) * len(cells), tuple(cells))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @cached_property
    def h(self) -> tuple:
        return tuple((b - a) / n for a, b, n in zip(self.lower, self.upper, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        return self.cell_volume * self.size

    def axis_centers(self, k: int) -> np.ndarray:
        return self.lower[k] + (np.arange(self.cells[k]) + 0.5) * self.h[k]

    @cached_property
    def centers(self) -> tuple:
        """Cell-centre coordinates, one array of ``shape`` per axis."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return tuple(_frozen(a) for a in np.meshgrid(*axes, indexing="ij"))

    def contains_box(self, lo, hi, tol: float = MEMBERSHIP_EPS) -> bool:
        scale = max(self.h)
        return all(
            l >= a - tol * scale and u <= b + tol * scale
            for l, u, a, b in zip(lo, hi, self.lower, self.upper)
        )

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "cells": list(self.cells)}


@dataclass(frozen=True)
class TimeAxis:
    t0: float
    T: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "steps", int(self.steps))
        if not self.T > self.t0:
            raise ValueError("T must exceed t0")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def to_dict(self) -> dict:
        return {"t0": self.t0, "T": self.T, "steps": self.steps}


@dataclass(frozen=True, eq=False)
class Field:
    """One value per cell."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(np.broadcast_to(np.asarray(self.values, dtype=float), self.grid.shape))
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, fn(*grid.centers))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Slices ``0..steps`` of a cell field; ``values`` has shape ``(steps+1, *grid.shape)``."""

    grid: Grid
    axis: TimeAxis
    values: np.ndarray

    def __post_init__(self):
        shape = (self.axis.steps + 1,) + self.grid.shape
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != shape:
            try:
                vals = np.broadcast_to(vals, shape)
            except ValueError:
                raise ValueError(f"expected values of shape {shape}, got {vals.shape}") from None
        vals = _frozen(vals)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, axis: TimeAxis, value: float) -> "SpaceTimeField":
        return cls(grid, axis, np.full((axis.steps + 1,) + grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, axis: TimeAxis, fn) -> "SpaceTimeField":
        """``fn(t, *x)`` evaluated at every slice time and cell centre."""
        t = axis.times.reshape((-1,) + (1,) * grid.dim)
        xs = tuple(c[None, ...] for c in grid.centers)
        return cls(grid, axis, np.broadcast_to(fn(t, *xs), (axis.steps + 1,) + grid.shape))

    def slice(self, m: int) -> Field:
        return Field(self.grid, self.values[m])


@dataclass(frozen=True, eq=False)
class TensorField:
    """Symmetric ``n x n`` matrix per cell, optionally one per time slice.

    ``values`` has shape ``(*grid.shape, n, n)`` or, when ``axis`` is given,
    ``(steps+1, *grid.shape, n, n)``.
    """

    grid: Grid
    values: np.ndarray
    axis: TimeAxis | None = None

    def __post_init__(self):
        n = self.grid.dim
        vals = np.asarray(self.values, dtype=float)
        lead = () if self.axis is None else (self.axis.steps + 1,)
        shape = lead + self.grid.shape + (n, n)
        if vals.shape != shape:
            vals = np.broadcast_to(vals, shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("tensor values must be finite")
        scale = max(1.0, float(np.abs(vals).max()))
        if not np.allclose(vals, np.swapaxes(vals, -1, -2), rtol=0, atol=1e-14 * scale):
            raise ValueError("tensor field must be symmetric")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def identity(cls, grid: Grid, scale: float = 1.0) -> "TensorField":
        return cls(grid, scale * np.broadcast_to(np.eye(grid.dim), grid.shape + (grid.dim, grid.dim)))

    @classmethod
    def isotropic(cls, grid: Grid, a, axis: TimeAxis | None = None) -> "TensorField":
        a = np.asarray(a, dtype=float)
        return cls(grid, a[..., None, None] * np.eye(grid.dim), axis)

    @property
    def time_dependent(self) -> bool:
        return self.axis is not None

    def at(self, m: int) -> np.ndarray:
        """Matrix field at slice ``m`` (the static field for every ``m`` otherwise)."""
        return self.values[m] if self.time_dependent else self.values

    def eigenvalue_range(self) -> tuple:
        ev = np.linalg.eigvalsh(self.values)
        return float(ev.min()), float(ev.max())

    def is_elliptic(self, Lambda: float, tol: float = 1e-12) -> bool:
        lo, hi = self.eigenvalue_range()
        return lo >= 1.0 / Lambda - tol and hi <= Lambda + tol

    def diagonal(self, m: int = 0) -> tuple:
        """Per-axis principal coefficients ``A_kk`` as cell arrays."""
        a = self.at(m)
        return tuple(a[..., k, k] for k in range(self.grid.dim))


@dataclass(frozen=True)
class ParabolicCube:
    """``B_rho(center) x (s - rho^2, s + rho^2]`` (centered) or ``(s - rho^2, s]`` (backward)."""

    center: tuple
    s: float
    radius: float
    variant: str = "centered"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValueError("cube radius must be positive")
        if self.variant not in ("centered", "backward"):
            raise ValueError("variant must be 'centered' or 'backward'")

    @property
    def time_interval(self) -> tuple:
        r2 = self.radius ** 2
        return self.s - r2, (self.s + r2 if self.variant == "centered" else self.s)

    def scaled(self, factor: float) -> "ParabolicCube":
        return ParabolicCube(self.center, self.s, self.radius * factor, self.variant)

    def space_mask(self, grid: Grid) -> np.ndarray:
        """Cells whose centre lies in the open ball."""
        if len(self.center) != grid.dim:
            raise ValueError("cube and grid dimensions differ")
        d2 = sum((c - y) ** 2 for c, y in zip(grid.centers, self.center))
        return d2 < self.radius ** 2 * (1 - MEMBERSHIP_EPS)

    def time_mask(self, axis: TimeAxis) -> np.ndarray:
        a, b = self.time_interval
        t = axis.times
        eps = MEMBERSHIP_EPS * axis.dt
        return (t > a + eps) & (t <= b + eps)


def _time_mask_domain(axis: TimeAxis) -> np.ndarray:
    mask = np.ones(axis.steps + 1, dtype=bool)
    mask[0] = False
    return mask


def cell_integral(f, region: ParabolicCube | None = None, average: bool = False) -> float:
    """Midpoint-rule integral (or mean) of a field over the domain or a cube.

    Space-time fields are integrated over ``(t0, T]``: slice ``m`` carries weight
    ``dt`` when its time lies in the region's interval, so slice 0 only counts
    for cubes that reach back before ``t0``.
    """
    grid = f.grid
    if isinstance(f, SpaceTimeField):
        tmask = _time_mask_domain(f.axis) if region is None else region.time_mask(f.axis)
        smask = np.ones(grid.shape, bool) if region is None else region.space_mask(grid)
        weight = grid.cell_volume * f.axis.dt
        count = int(tmask.sum()) * int(smask.sum())
        total = float(f.values[tmask][:, smask].sum()) * weight if count else 0.0
    else:
        smask = np.ones(grid.shape, bool) if region is None else region.space_mask(grid)
        weight = grid.cell_volume
        count = int(smask.sum())
        total = float(f.values[smask].sum()) * weight
    if count == 0:
        raise ValueError("empty region")
    return total / (count * weight) if average else total


def face_gradient(f, grid: Grid | None = None) -> tuple:
    """Gradient on cell faces, one array per axis.

    Along axis ``k`` the result has ``cells[k] + 1`` faces; the two boundary
    faces are zero (homogeneous Neumann). Accepts a :class:`Field`, a
    :class:`SpaceTimeField` or a raw array whose trailing axes match ``grid``.
    """
    if grid is None:
        grid = f.grid
    vals = np.asarray(getattr(f, "values", f), dtype=float)
    lead = vals.ndim - grid.dim
    out = []
    for k in range(grid.dim):
        ax = lead + k
        inner = np.diff(vals, axis=ax) / grid.h[k]
        pad = [(0, 0)] * vals.ndim
        pad[ax] = (1, 1)
        out.append(np.pad(inner, pad))
    return tuple(out)


def cell_gradient(f, grid: Grid | None = None) -> tuple:
    """Cell-centred gradient: mean of the two faces bounding each cell per axis."""
    if grid is None:
        grid = f.grid
    faces = face_gradient(f, grid)
    vals_ndim = np.ndim(getattr(f, "values", f))
    lead = vals_ndim - grid.dim
    out = []
    for k, g in enumerate(faces):
        ax = lead + k
        n = g.shape[ax]
        lo = np.take(g, np.arange(n - 1), axis=ax)
        hi = np.take(g, np.arange(1, n), axis=ax)
        out.append(0.5 * (lo + hi))
    return tuple(out)


def gradient_magnitude(f, grid: Grid | None = None) -> np.ndarray:
    return np.sqrt(sum(g ** 2 for g in cell_gradient(f, grid)))


# --------------------------------------------------------------------------
# binary snapshots

def write_snapshot(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    header = _MAGIC + struct.pack("<IB", _VERSION, values.ndim)
    header += struct.pack(f"<{values.ndim}Q", *values.shape)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes(order="C"))
    tmp.replace(path)


def read_snapshot(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a FLD1 snapshot")
    version, rank = struct.unpack_from("<IB", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    offset = 9
    shape = struct.unpack_from(f"<{rank}Q", data, offset)
    offset += 8 * rank
    count = int(np.prod(shape)) if rank else 1
    if len(data) - offset != 8 * count:
        raise ValueError(f"{path}: truncated snapshot")
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)


def write_space_time(directory, stem: str, field: SpaceTimeField) -> list:
    """One snapshot per slice plus ``<stem>.json`` describing grid and time axis."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for m in range(field.axis.steps + 1):
        name = f"{stem}_{m:05d}.fld"
        write_snapshot(directory / name, field.values[m])
        files.append(name)
    sidecar = {
        "grid": field.grid.to_dict(),
        "t0": field.axis.t0,
        "dt": field.axis.dt,
        "steps": field.axis.steps,
        "files": files,
    }
    tmp = directory / f"{stem}.json.tmp"
    tmp.write_text(json.dumps(sidecar, indent=2))
    tmp.replace(directory / f"{stem}.json")
    return files + [f"{stem}.json"]


def read_space_time(sidecar_path) -> SpaceTimeField:
    sidecar_path = Path(sidecar_path)
    meta = json.loads(sidecar_path.read_text())
    grid = Grid(**meta["grid"])
    steps = int(meta["steps"])
    axis = TimeAxis(meta["t0"], meta["t0"] + steps * meta["dt"], steps)
    slices = [read_snapshot(sidecar_path.parent / name) for name in meta["files"]]
    return SpaceTimeField(grid, axis, np.stack(slices))
