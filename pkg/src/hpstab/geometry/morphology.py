"""Blowing X^eps and contraction X^-eps on raster sets.

Distances are exact Euclidean distances between cell centers; space outside the
box is treated as complement.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..errors import DomainError
from .raster import RasterSet


def distance_to(mask: np.ndarray, h: float, pad: bool = False) -> np.ndarray:
    """Distance from every cell center to the nearest center flagged in ``mask``.

    With ``pad=True`` the ring of cells just outside the box is flagged too.
    Returns ``inf`` everywhere when nothing is flagged.
    """
    if pad:
        m = np.pad(mask, 1, constant_values=True)
        return ndimage.distance_transform_edt(~m, sampling=h)[1:-1, 1:-1]
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return ndimage.distance_transform_edt(~mask, sampling=h)


def dilate(X: RasterSet, eps: float, *, check_margin: bool = True) -> RasterSet:
    if eps < 0:
        raise DomainError("dilation radius must be nonnegative")
    if eps == 0 or X.is_empty:
        return X
    out = RasterSet(X.grid, distance_to(X.mask, X.grid.h) < eps)
    if check_margin:
        out.check_margin()
    return out


def erode(X: RasterSet, eps: float) -> RasterSet:
    if eps < 0:
        raise DomainError("erosion radius must be nonnegative")
    if eps == 0:
        return X
    d = distance_to(~X.mask, X.grid.h, pad=True)
    return RasterSet(X.grid, X.mask & (d >= eps))


def point_distance(X: RasterSet, points) -> np.ndarray:
    """Distance from arbitrary points to the sample set of ``X``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if X.is_empty:
        return np.full(len(pts), np.inf)
    d, _ = cKDTree(X.samples()).query(pts)
    return d


def in_dilation(X: RasterSet, eps: float, points) -> np.ndarray:
    """Membership of arbitrary points in the open eps-blowing of ``X``."""
    return point_distance(X, points) < eps
