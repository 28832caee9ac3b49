"""Experiment configuration read from JSON text."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..model import Model, model_zoo
from ..solver import SchemeParams
from ..torus_grid import Grid, VelocityGrid, make_grid

KINDS = ("solve", "critical", "mather", "barrier", "limit", "converge", "counterexample",
         "uniqueness", "shifted")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: str = "pendulum"
    model_params: dict = field(default_factory=dict)
    points_per_unit: int = 256
    tau: float = 0.01
    vmax: float = 3.0
    velocities: int = 121
    tol: float = 1e-9
    max_iter: int = 20000
    method: str = "newton"
    lambda_ladder: tuple = (0.5, 0.25, 0.125)
    anchors: tuple = (0,)
    output_dir: str | None = None
    seeds: tuple = (-10.0, 0.0, 10.0)
    expect: str | None = None  # uniqueness: "unique" | "multiple"
    T1: float = 20.0
    T2: float = 40.0
    bracket: tuple = (-10.0, 10.0)
    final_tol: float = 5e-2
    monotone_slack: float = 1e-3
    margin: float = 1e-3
    band_eps: float = 0.05
    lip_factor: float = 1.1
    gap_threshold: float = 1.0
    oversample: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        for name in ("lambda_ladder", "anchors", "seeds", "bracket"):
            val = getattr(self, name)
            object.__setattr__(self, name, tuple(val) if isinstance(val, (list, tuple)) else (val,))
        lad = np.asarray(self.lambda_ladder, dtype=float)
        if lad.size == 0 or np.any(lad <= 0) or np.any(np.diff(lad) >= 0):
            raise ConfigError(f"lambda_ladder must be strictly decreasing and positive: "
                              f"{self.lambda_ladder}")
        if self.points_per_unit < 1:
            raise ConfigError("points_per_unit must be positive")
        if self.expect not in (None, "unique", "multiple"):
            raise ConfigError(f"expect must be 'unique' or 'multiple', got {self.expect!r}")
        if len(self.bracket) != 2:
            raise ConfigError("bracket needs two numbers")
        try:
            sp = self.scheme()
            sp.check(self.grid())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict, kind: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        if kind is not None:
            if data.get("kind", kind) != kind:
                raise ConfigError(f"config kind {data['kind']!r} does not match {kind!r}")
            data["kind"] = kind
        if "kind" not in data:
            raise ConfigError("config needs a 'kind'")
        return cls(**data)

    @classmethod
    def from_json(cls, source, kind: str | None = None) -> "ExperimentConfig":
        """``source`` is a path or JSON text."""
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, kind)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def build_model(self) -> Model:
        try:
            return model_zoo(self.model, **self.model_params)
        except TypeError as exc:
            raise ConfigError(f"bad model_params for {self.model!r}: {exc}") from exc

    def period(self) -> float:
        return self.build_model().period

    def grid(self, period: float | None = None) -> Grid:
        period = self.period() if period is None else period
        return make_grid(period, int(round(self.points_per_unit * period)))

    def scheme(self) -> SchemeParams:
        return SchemeParams(tau=self.tau, vgrid=VelocityGrid(self.vmax, self.velocities),
                            tol=self.tol, max_iter=self.max_iter, method=self.method)
