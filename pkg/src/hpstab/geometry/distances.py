"""Excess functions e, e-check and the Hausdorff-type distances built from them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DomainError, EmptyDomain
from .morphology import distance_to
from .raster import RasterSet


def _excess(a: np.ndarray, b: np.ndarray, h: float) -> float:
    if not a.any():
        return 0.0
    if not b.any():
        return math.inf
    return float(distance_to(b, h)[a].max())


def gap(X: RasterSet, Y: RasterSet) -> float:
    """sup over samples of X of the distance to the samples of Y.

    ``0`` when X is empty, ``inf`` when Y is empty and X is not.
    """
    X._same_grid(Y)
    return _excess(X.mask, Y.mask, X.grid.h)


def co_gap(X: RasterSet, Y: RasterSet) -> float:
    """gap(box \\ Y, box \\ X)."""
    X._same_grid(Y)
    return _excess(~Y.mask, ~X.mask, X.grid.h)


@dataclass(frozen=True)
class HausdorffDistances:
    d_H: float
    d_upper_H: float
    d_HP: float
    d_HS: float

    def as_dict(self) -> dict:
        return asdict(self)


def boundary_excess(X: RasterSet, Y: RasterSet, Z: RasterSet) -> float:
    """e(X delta Y, boundary of Z)."""
    return _excess(X.mask ^ Y.mask, Z.boundary().mask, X.grid.h)


def hausdorff_distances(X: RasterSet, Y: RasterSet) -> HausdorffDistances:
    if X.grid != Y.grid:
        raise DomainError("raster sets live on different grids")
    if X.is_empty or Y.is_empty:
        raise EmptyDomain("Hausdorff distances need nonempty sets")
    d_H = max(gap(X, Y), gap(Y, X))
    d_up = max(co_gap(X, Y), co_gap(Y, X))
    d_HP = max(d_H, d_up)
    d_HS = min(boundary_excess(X, Y, Y), boundary_excess(X, Y, X), d_H, d_up)
    return HausdorffDistances(d_H, d_up, d_HP, d_HS)
