"""Periodic grids on the flat circle R/nZ and functions sampled on them.

Everything here is immutable: ``GridFunction.values`` is a read-only array,
so grid functions can be shared freely between solvers.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = i * period / points`` on R/(period)Z."""

    period: float
    points: int

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.points < 2:
            raise ValueError(f"points too small: {self.points}")

    @property
    def spacing(self) -> float:
        return self.period / self.points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def node(self, i: int) -> float:
        return (i % self.points) * self.spacing

    def index_of(self, x: float) -> int:
        """Index of the node nearest to ``x`` (periodic)."""
        return int(np.rint(np.mod(x, self.period) / self.spacing)) % self.points

    def wrap(self, x):
        return np.mod(x, self.period)


def make_grid(period: float, points: int) -> Grid:
    if not period > 0:
        raise ValueError(f"period must be positive, got {period}")
    if points < MIN_POINTS:
        raise ValueError(f"points too small: {points} < {MIN_POINTS}")
    return Grid(float(period), int(points))


@dataclass(frozen=True)
class VelocityGrid:
    """Symmetric uniform velocity samples on [-vmax, vmax]; 0 is always included."""

    vmax: float
    count: int

    def __post_init__(self):
        if not self.vmax > 0:
            raise ValueError(f"vmax must be positive, got {self.vmax}")
        if self.count < 3 or self.count % 2 == 0:
            raise ValueError(f"velocity count must be odd and >= 3, got {self.count}")

    @property
    def velocities(self) -> np.ndarray:
        half = self.count // 2
        return np.arange(-half, half + 1) * (self.vmax / half)

    @property
    def step(self) -> float:
        return self.vmax / (self.count // 2)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.points,):
            raise ValueError(
                f"expected {self.grid.points} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.points,)))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.points, float(value)))

    def __call__(self, x):
        return interp(self, x)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __mul__(self, k):
        return GridFunction(self.grid, self.values * k)

    __rmul__ = __mul__

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "value"])
        for x, val in zip(self.grid.nodes, self.values):
            writer.writerow([repr(float(x)), repr(float(val))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, period: float) -> "GridFunction":
        """Read a ``x,value`` table; ``source`` is a path or the CSV text itself."""
        text = Path(source).read_text() if _looks_like_path(source) else source
        rows = list(csv.DictReader(io.StringIO(text)))
        xs = np.array([float(r["x"]) for r in rows])
        grid = Grid(float(period), len(rows))
        if not np.allclose(xs, grid.nodes, atol=1e-12 * period):
            raise ValueError("CSV x column is not a uniform grid on [0, period)")
        return cls(grid, np.array([float(r["value"]) for r in rows]))


def _looks_like_path(source) -> bool:
    return isinstance(source, Path) or (isinstance(source, str) and "\n" not in source)


def _check_same_grid(f: GridFunction, g: GridFunction):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


def interp_values(values: np.ndarray, grid: Grid, x) -> np.ndarray:
    """Periodic piecewise-linear interpolation of raw node values."""
    s = np.mod(np.asarray(x, dtype=float), grid.period) / grid.spacing
    # snap round-off so nodes reproduce their values exactly
    s_round = np.rint(s)
    s = np.where(np.abs(s - s_round) < 1e-10, s_round, s)
    i0 = np.floor(s).astype(int)
    theta = s - i0
    i0 %= grid.points
    i1 = (i0 + 1) % grid.points
    return (1.0 - theta) * values[i0] + theta * values[i1]


def interp(f: GridFunction, x):
    out = interp_values(f.values, f.grid, x)
    return float(out) if np.ndim(out) == 0 else out


def sup_dist(f: GridFunction, g: GridFunction) -> float:
    _check_same_grid(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def lipschitz_estimate(f: GridFunction) -> float:
    """Largest slope between neighbouring nodes, wrap-around edge included."""
    diffs = np.diff(f.values, append=f.values[0])
    return float(np.max(np.abs(diffs)) / f.grid.spacing)
