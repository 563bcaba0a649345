"""Cusp cones and the sampled uniform omega-cusp condition.

A raster set X passes the check at a sample x with direction xi when no pair of
samples ``a`` in X, ``b`` outside X with ``a - b`` in the cone C(xi) has

* ``b`` within ``2 psi(r)`` of x  (condition W1, "moving inside against the cone
  stays inside"), or
* ``a`` within ``2 psi(r)`` of x  (condition W2, "moving outside along the cone
  stays outside").

Cone vectors are shorter than ``psi(r)``, so the outer ``3 psi(r)`` ball of the
continuum definition never constrains a pair and is not tested separately.
Lattice differences ``a - b`` form a finite stencil; for every stencil offset we
mark the "bad" outside cells ``b`` and take one distance transform, which turns
both conditions into table lookups at the tested points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import DomainError
from .modulus import Modulus, psi
from .raster import RasterSet


@dataclass(frozen=True)
class CuspCone:
    modulus: Modulus
    r: float
    xi: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        n = math.hypot(*self.xi)
        if abs(n - 1.0) > 1e-9:
            raise DomainError("cone direction must be a unit vector")
        if self.r <= 0:
            raise DomainError("cone radius must be positive")

    def contains(self, z) -> np.ndarray | bool:
        return cone_contains(self, z)


def _cone_mask(m: Modulus, r: float, xi: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Membership of points ``z (..., 2)`` in C_{omega,r}(xi) for directions
    ``xi (k, 2)``; returns shape ``(k, ...)``."""
    xi = np.atleast_2d(xi)
    z = np.asarray(z, dtype=float)
    zd = np.tensordot(xi, z, axes=([1], [-1]))
    perp = np.stack([-xi[:, 1], xi[:, 0]], axis=1)
    zt = np.abs(np.tensordot(perp, z, axes=([1], [-1])))
    w_r = m(r)
    ps = math.hypot(r, w_r)
    norm = np.linalg.norm(z, axis=-1)
    in_f = (norm < ps) & (zd >= w_r)
    zt_c = np.minimum(zt, r)
    in_s = (zt < r) & (m(zt_c) < zd) & (zd < w_r)
    return in_f | in_s


def cone_contains(cone: CuspCone, z) -> np.ndarray | bool:
    out = _cone_mask(cone.modulus, cone.r, np.asarray(cone.xi, dtype=float), z)[0]
    return bool(out) if out.ndim == 0 else out


def lattice_directions(n: int = 64) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(ang), np.sin(ang)])


@dataclass(frozen=True)
class CuspRecord:
    cell: tuple[int, int]
    point: tuple[float, float]
    xi: tuple[float, float] | None
    margin: float
    pair: tuple[tuple[float, float], tuple[float, float]] | None = None


@dataclass(frozen=True)
class CuspReport:
    passed: bool
    condition: str
    r: float
    modulus: dict
    records: tuple[CuspRecord, ...] = field(default=())

    @property
    def failures(self) -> list[CuspRecord]:
        return [rec for rec in self.records if rec.margin < 0]

    def direction_at(self, cell) -> np.ndarray | None:
        for rec in self.records:
            if rec.cell == tuple(cell):
                return None if rec.xi is None else np.array(rec.xi)
        raise KeyError(cell)

    def to_json(self) -> str:
        return json.dumps({
            "pass": self.passed,
            "condition": self.condition,
            "r": self.r,
            "modulus": self.modulus,
            "records": [
                {"cell": list(rec.cell), "point": list(rec.point),
                 "xi": None if rec.xi is None else list(rec.xi),
                 "margin": rec.margin,
                 "pair": None if rec.pair is None else [list(p) for p in rec.pair]}
                for rec in self.records
            ],
        }, indent=2)


def _offsets(rad: float, h: float) -> np.ndarray:
    k = int(math.ceil(rad / h))
    ii, jj = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    d2 = (ii * h) ** 2 + (jj * h) ** 2
    keep = (d2 < rad * rad) & (d2 > 0)
    return np.column_stack([ii[keep], jj[keep]])


def _as_cells(X: RasterSet, points) -> np.ndarray:
    if points is None:
        cells = np.argwhere(X.boundary().mask)
    else:
        pts = np.atleast_2d(np.asarray(points))
        if np.issubdtype(pts.dtype, np.integer):
            cells = pts.astype(int)
        else:
            cells = np.array([X.grid.cell_of(px, py) for px, py in pts], dtype=int)
    return cells.reshape(-1, 2)


def cusp_distances(X: RasterSet, m: Modulus, r: float, cells: np.ndarray,
                   directions: np.ndarray):
    """Distances from each tested cell to the nearest violating sample, per direction.

    Returns ``(w1, w2, cap)`` with ``w1, w2`` of shape ``(n_dir, n_cells)``; a
    verdict fails where the distance is below ``2 psi(r)``.  Distances beyond
    ``cap = 3 psi(r)`` are clipped to ``cap``.
    """
    g = X.grid
    h = g.h
    ps = float(psi(m, r))
    if 3 * ps > g.side:
        raise DomainError(f"3 psi(r) = {3 * ps:.4g} exceeds the box side {g.side}")
    cap = 3 * ps
    offs = _offsets(ps, h)
    vecs = offs * h
    incone = _cone_mask(m, r, directions, vecs)  # (n_dir, n_off)
    n_dir = len(directions)
    w1 = np.full((n_dir, len(cells)), cap)
    w2 = np.full((n_dir, len(cells)), cap)
    if len(cells) == 0 or len(offs) == 0:
        return w1, w2, cap
    R = int(math.ceil(cap / h)) + 2
    padded = np.pad(X.mask, R, constant_values=False)
    pc = cells + R
    lo = np.maximum(pc.min(axis=0) - R, 0)
    hi = np.minimum(pc.max(axis=0) + R + 1, padded.shape)
    win = padded[lo[0]:hi[0], lo[1]:hi[1]]
    loc = pc - lo
    outside = ~win
    used = incone.any(axis=0)
    for k in np.flatnonzero(used):
        di, dj = offs[k]
        # bad[b] = b outside and b + offset inside
        shifted = np.zeros_like(win)
        src = win[max(di, 0):win.shape[0] + min(di, 0), max(dj, 0):win.shape[1] + min(dj, 0)]
        shifted[max(-di, 0):win.shape[0] - max(di, 0), max(-dj, 0):win.shape[1] - max(dj, 0)] = src
        bad = outside & shifted
        if not bad.any():
            continue
        dist = ndimage.distance_transform_edt(~bad, sampling=h)
        d1 = np.minimum(dist[loc[:, 0], loc[:, 1]], cap)
        d2 = np.minimum(dist[loc[:, 0] - di, loc[:, 1] - dj], cap)
        sel = incone[:, k]
        w1[sel] = np.minimum(w1[sel], d1[None, :])
        w2[sel] = np.minimum(w2[sel], d2[None, :])
    return w1, w2, cap


def _violating_pair(X: RasterSet, m: Modulus, r: float, cell, xi, condition: str):
    """Closest violating sample pair (inside point, outside point) for one cell."""
    g = X.grid
    h = g.h
    ps = float(psi(m, r))
    offs = _offsets(ps, h)
    sel = _cone_mask(m, r, np.asarray(xi)[None, :], offs * h)[0]
    k = int(math.ceil(3 * ps / h)) + 1
    ci, cj = cell
    best = None
    for bi in range(ci - k, ci + k + 1):
        for bj in range(cj - k, cj + k + 1):
            for di, dj in offs[sel]:
                ai, aj = bi + di, bj + dj
                b_in = 0 <= bi < g.n and 0 <= bj < g.n and X.mask[bi, bj]
                a_in = 0 <= ai < g.n and 0 <= aj < g.n and X.mask[ai, aj]
                if b_in or not a_in:
                    continue
                t = (bi, bj) if condition == "W1" else (ai, aj)
                d = h * math.hypot(t[0] - ci, t[1] - cj)
                if d < 2 * ps and (best is None or d < best[0]):
                    best = (d, (ai, aj), (bi, bj))
    if best is None:
        return None
    return (tuple(g.cell_center(*best[1])), tuple(g.cell_center(*best[2])))


def cusp_check(X: RasterSet, m: Modulus, r: float, points=None, *,
               n_directions: int = 64, directions=None, condition: str = "W1",
               with_pairs: bool = True) -> CuspReport:
    """Check the sampled omega-cusp condition at the given cells (default: every
    boundary sample of X).  A point passes if any tested direction passes.

    ``points`` are integer cell indices or physical coordinates (snapped to the
    containing cell).  ``condition`` selects ``"W1"`` or ``"W2"``.
    """
    if condition not in ("W1", "W2"):
        raise DomainError("condition must be 'W1' or 'W2'")
    dirs = lattice_directions(n_directions) if directions is None else \
        np.atleast_2d(np.asarray(directions, dtype=float))
    cells = _as_cells(X, points)
    w1, w2, _ = cusp_distances(X, m, r, cells, dirs)
    ps = float(psi(m, r))
    margins = (w1 if condition == "W1" else w2) - 2 * ps
    best = np.argmax(margins, axis=0) if len(cells) else np.array([], dtype=int)
    recs = []
    for idx, (ci, cj) in enumerate(cells):
        k = int(best[idx])
        mg = float(margins[k, idx])
        xi = tuple(float(v) for v in dirs[k]) if mg >= 0 else None
        pair = None
        if mg < 0 and with_pairs:
            pair = _violating_pair(X, m, r, (ci, cj), dirs[k], condition)
        recs.append(CuspRecord((int(ci), int(cj)), tuple(X.grid.cell_center(ci, cj)),
                               xi, mg, pair))
    passed = all(rec.margin >= 0 for rec in recs)
    return CuspReport(passed, condition, float(r), m.to_config(), tuple(recs))


def cusp_verdicts(X: RasterSet, m: Modulus, r: float, cell, xi) -> tuple[bool, bool]:
    """(W1 verdict, W2 verdict) for a single cell and a single direction."""
    w1, w2, _ = cusp_distances(X, m, r, np.atleast_2d(np.asarray(cell, dtype=int)),
                               np.atleast_2d(np.asarray(xi, dtype=float)))
    ps = float(psi(m, r))
    return bool(w1[0, 0] >= 2 * ps), bool(w2[0, 0] >= 2 * ps)
