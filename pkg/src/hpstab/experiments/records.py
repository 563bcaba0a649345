"""Sweep and audit records with CSV/JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..geometry.distances import HausdorffDistances
from .fitting import SlopeFit

DISTANCE_KEYS = ("d_H", "d_upper_H", "d_HP", "d_HS", "boundary_gap")


def fmt(v) -> str:
    """Full-precision CSV cell."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if isinstance(v, (dict, list, tuple)):
        v = json.dumps(_jsonable(v), sort_keys=True)
    text = str(v)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(k, "")) for k in header) + "\n")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


@dataclass(frozen=True)
class SweepRecord:
    """One family member: nominal and measured distances plus named measurements."""

    eps: float
    distances: dict
    values: dict = field(default_factory=dict)

    @classmethod
    def build(cls, eps: float, hd: HausdorffDistances, boundary_gap: float, **values):
        d = hd.as_dict()
        d["boundary_gap"] = boundary_gap
        return cls(float(eps), d, dict(values))

    def __getitem__(self, key):
        if key == "eps":
            return self.eps
        if key in self.distances:
            return self.distances[key]
        return self.values[key]

    def row(self) -> dict:
        out = {"eps": self.eps}
        out.update(self.distances)
        out.update(self.values)
        return out


@dataclass(frozen=True)
class SweepResult:
    kind: str
    records: tuple
    fits: dict = field(default_factory=dict)      # name -> SlopeFit
    constants: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def column(self, key) -> list:
        return [rec[key] for rec in self.records]

    @property
    def header(self) -> list[str]:
        keys = ["eps", *DISTANCE_KEYS]
        for rec in self.records:
            for k in rec.values:
                if k not in keys:
                    keys.append(k)
        return keys

    def to_csv(self, path) -> None:
        write_csv(path, self.header, [rec.row() for rec in self.records])

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "fit": {k: v.as_dict() for k, v in self.fits.items()},
            "constants": dict(self.constants),
            "flags": dict(self.flags),
        }

    def plot_csv(self, path, x: str, y: str) -> None:
        """Two-column CSV of one figure series."""
        write_csv(path, [x, y], [{x: rec[x], y: rec[y]} for rec in self.records])


@dataclass(frozen=True)
class AuditReport:
    """``passed`` holds exactly when ``worst_slack >= -tolerance``."""

    name: str
    instances: int
    worst_slack: float
    tolerance: float
    seed: int | None = None
    rejected: int = 0
    details: tuple = ()

    @property
    def passed(self) -> bool:
        return self.worst_slack >= -self.tolerance

    @property
    def violations(self) -> list:
        return [d for d in self.details if d.get("slack", 0.0) < -self.tolerance]

    def summary(self) -> dict:
        return {"audit": self.name, "instances": self.instances, "rejected": self.rejected,
                "worst_slack": self.worst_slack, "tolerance": self.tolerance,
                "pass": self.passed, "seed": self.seed}

    def to_csv(self, path) -> None:
        keys: list[str] = []
        for d in self.details:
            for k in d:
                if k not in keys:
                    keys.append(k)
        write_csv(path, keys, list(self.details))


def merge_min(slacks) -> float:
    vals = [s for s in slacks if not math.isnan(s)]
    return min(vals) if vals else math.inf


__all__ = ["SweepRecord", "SweepResult", "AuditReport", "SlopeFit", "write_csv", "to_json"]
