"""Least-squares power-law fits on log-log data."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    points: int

    def as_dict(self) -> dict:
        return asdict(self)


def fit_slope(x, y) -> SlopeFit:
    """Fit ``log y = slope * log x + intercept``; ``residual`` is the RMS misfit."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("fit_slope needs two equally long 1-D sequences")
    if len(x) < 3:
        raise DomainError("fit_slope needs at least three points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))) or np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("fit_slope needs finite positive data")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(math.sqrt(np.mean(resid ** 2))), len(x))
