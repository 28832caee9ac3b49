"""Experiment reports: rows of numbers plus verdicts with their evidence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Verdict:
    """One comparison ``value <op> threshold``.

    ``informational`` verdicts record a classification (e.g. "multiple
    solutions") and never fail a run.
    """

    name: str
    passed: bool
    value: float
    threshold: float
    comparison: str
    detail: str = ""
    informational: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check(name, value, op, threshold, detail="") -> Verdict:
    ops = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
           "<": lambda a, b: a < b, ">": lambda a, b: a > b}
    return Verdict(name, bool(ops[op](value, threshold)), float(value), float(threshold),
                   f"{value:.6g} {op} {threshold:.6g}", detail)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _all_finite(obj) -> bool:
    if isinstance(obj, float):
        return math.isfinite(obj)
    if isinstance(obj, dict):
        return all(_all_finite(v) for v in obj.values())
    if isinstance(obj, list):
        return all(_all_finite(v) for v in obj)
    return True


@dataclass
class ExperimentReport:
    kind: str
    inputs: dict
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # file name -> text

    @property
    def passed(self) -> bool:
        return all(v.passed or v.informational for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = _clean({"kind": self.kind, "inputs": self.inputs, "rows": self.rows,
                    "verdicts": [v.to_dict() for v in self.verdicts], "data": self.data,
                    "passed": self.passed, "files": sorted(self.files)})
        if not _all_finite(d):
            raise ValueError("report holds non-finite numbers")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text)
        path = out / "report.json"
        path.write_text(self.to_json())
        return path
