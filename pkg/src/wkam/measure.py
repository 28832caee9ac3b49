"""Probability weights on the (node, velocity) product grid."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .torus_grid import Grid, VelocityGrid

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    grid: Grid
    vgrid: VelocityGrid
    weights: np.ndarray = field(repr=False)  # shape (points, count)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.grid.points, self.vgrid.count):
            raise ValueError(f"weights must have shape {(self.grid.points, self.vgrid.count)}")
        if np.any(w < 0):
            if w.min() < -1e-12:
                raise ValueError(f"negative weight {w.min():.3g}")
            w = np.maximum(w, 0.0)
        total = w.sum()
        if not total > 0:
            raise ValueError("measure has zero mass")
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"total mass {total} is not 1")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, grid, vgrid, weights, **meta) -> "OccupationMeasure":
        w = np.maximum(np.asarray(weights, dtype=float), 0.0)
        return cls(grid, vgrid, w / w.sum(), dict(meta))

    @classmethod
    def dirac(cls, grid, vgrid, node: int, vel_index: int | None = None, **meta):
        w = np.zeros((grid.points, vgrid.count))
        w[node % grid.points, vgrid.count // 2 if vel_index is None else vel_index] = 1.0
        return cls(grid, vgrid, w, dict(meta))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def support(self, threshold: float = 0.0):
        """(x, v, weight) triples with weight above ``threshold``."""
        ii, jj = np.nonzero(self.weights > threshold)
        xs, vs = self.grid.nodes, self.vgrid.velocities
        return [(float(xs[i]), float(vs[j]), float(self.weights[i, j])) for i, j in zip(ii, jj)]

    def projected(self) -> np.ndarray:
        """Marginal on the nodes."""
        return self.weights.sum(axis=1)

    def integrate(self, table: np.ndarray) -> float:
        """Integral of a (points, count) table of integrand values."""
        return float(np.sum(self.weights * table))

    def to_csv(self, path=None, threshold: float = 0.0) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "v", "weight"])
        for x, v, w in self.support(threshold):
            writer.writerow([repr(x), repr(v), repr(w)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text
