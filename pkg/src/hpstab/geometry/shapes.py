"""Analytic planar shapes and their rasterization onto a grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, EmptyDomain, ModulusError
from .modulus import Modulus
from .raster import GridGeometry, RasterSet


class Shape:
    """Open planar set.  Shapes with an exact signed distance support offsets."""

    exact_sdf = False

    def contains(self, x, y):
        return self.sdf(x, y) < 0

    def sdf(self, x, y):
        raise NotImplementedError(f"{type(self).__name__} has no signed distance")

    def offset(self, delta: float) -> "Shape":
        """Dilate (``delta > 0``) or erode (``delta < 0``) by ``|delta|``."""
        if not self.exact_sdf:
            raise DomainError(f"{type(self).__name__} has no exact signed distance")
        return Offset(self, float(delta))

    def translate(self, dx: float, dy: float) -> "Shape":
        return Translated(self, float(dx), float(dy))

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))

    def __sub__(self, other):
        return Difference(self, other)


@dataclass(frozen=True)
class Disk(Shape):
    cx: float
    cy: float
    radius: float
    exact_sdf = True

    def sdf(self, x, y):
        return np.hypot(np.asarray(x) - self.cx, np.asarray(y) - self.cy) - self.radius


@dataclass(frozen=True)
class Rectangle(Shape):
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    exact_sdf = True

    def sdf(self, x, y):
        cx, cy = 0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)
        hx, hy = 0.5 * (self.xmax - self.xmin), 0.5 * (self.ymax - self.ymin)
        qx = np.abs(np.asarray(x, dtype=float) - cx) - hx
        qy = np.abs(np.asarray(y, dtype=float) - cy) - hy
        outside = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0))
        inside = np.minimum(np.maximum(qx, qy), 0)
        return outside + inside


@dataclass(frozen=True)
class Polygon(Shape):
    """Simple polygon given by its vertices (either orientation)."""

    vertices: tuple[tuple[float, float], ...]
    exact_sdf = True

    def sdf(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(self.vertices, dtype=float)
        d2 = np.full(x.shape, np.inf)
        inside = np.zeros(x.shape, dtype=bool)
        for k in range(len(v)):
            ax, ay = v[k]
            bx, by = v[(k + 1) % len(v)]
            ex, ey = bx - ax, by - ay
            wx, wy = x - ax, y - ay
            t = np.clip((wx * ex + wy * ey) / (ex * ex + ey * ey), 0.0, 1.0)
            d2 = np.minimum(d2, (wx - t * ex) ** 2 + (wy - t * ey) ** 2)
            crosses = (ay > y) != (by > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = ax + (y - ay) * ex / (by - ay)
            inside ^= crosses & (x < xi)
        d = np.sqrt(d2)
        return np.where(inside, -d, d)


@dataclass(frozen=True)
class Offset(Shape):
    base: Shape
    delta: float
    exact_sdf = True

    def sdf(self, x, y):
        return self.base.sdf(x, y) - self.delta


@dataclass(frozen=True)
class Translated(Shape):
    base: Shape
    dx: float
    dy: float

    @property
    def exact_sdf(self):
        return self.base.exact_sdf

    def sdf(self, x, y):
        return self.base.sdf(np.asarray(x) - self.dx, np.asarray(y) - self.dy)

    def contains(self, x, y):
        return self.base.contains(np.asarray(x) - self.dx, np.asarray(y) - self.dy)


@dataclass(frozen=True)
class Union(Shape):
    parts: tuple[Shape, ...]

    def contains(self, x, y):
        out = np.zeros(np.shape(x), dtype=bool)
        for p in self.parts:
            out |= p.contains(x, y)
        return out


@dataclass(frozen=True)
class Intersection(Shape):
    parts: tuple[Shape, ...]

    def contains(self, x, y):
        out = np.ones(np.shape(x), dtype=bool)
        for p in self.parts:
            out &= p.contains(x, y)
        return out


@dataclass(frozen=True)
class Difference(Shape):
    """``a`` minus the closure of ``b`` (stays open)."""

    a: Shape
    b: Shape

    def contains(self, x, y):
        inb = self.b.sdf(x, y) <= 0 if self.b.exact_sdf else self.b.contains(x, y)
        return self.a.contains(x, y) & ~inb


@dataclass(frozen=True)
class BoundaryGraph(Shape):
    """Region between a horizontal floor/ceiling and the graph of ``g``.

    ``t`` are increasing abscissae covering ``[xmin, xmax]``; ``g`` is linearly
    interpolated.  ``side="below"`` gives ``{xmin < x < xmax, floor < y < g(x)}``,
    ``side="above"`` gives ``{xmin < x < xmax, g(x) < y < floor}``.
    """

    t: tuple[float, ...]
    g: tuple[float, ...]
    side: str = "below"
    floor: float = 0.0
    xmin: float = 0.0
    xmax: float = 1.0

    def __post_init__(self):
        if self.side not in ("below", "above"):
            raise DomainError("side must be 'below' or 'above'")
        if len(self.t) != len(self.g) or len(self.t) < 2:
            raise DomainError("graph needs matching t/g samples")

    def graph(self, x):
        return np.interp(x, self.t, self.g)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx = self.graph(x)
        strip = (x > self.xmin) & (x < self.xmax)
        if self.side == "below":
            return strip & (y > self.floor) & (y < gx)
        return strip & (y < self.floor) & (y > gx)


def rasterize(shape: Shape, grid: GridGeometry, *, check_margin: bool = True) -> RasterSet:
    """Cells whose centers lie in the open shape."""
    X, Y = grid.centers()
    r = RasterSet(grid, np.asarray(shape.contains(X, Y), dtype=bool))
    r.require_nonempty()
    if check_margin:
        r.check_margin()
    return r


def validate_graph_modulus(t, g, m: Modulus, C: float, rtol: float = 1e-12) -> float:
    """Largest ratio ``|g(a) - g(b)| / (C omega(|a - b|))`` over sample pairs.

    Raises ModulusError when it exceeds one.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    dt = np.abs(t[:, None] - t[None, :])
    dg = np.abs(g[:, None] - g[None, :])
    bound = C * m(dt)
    slack = dg - bound
    worst = float(slack.max())
    if worst > rtol * max(1.0, float(np.abs(g).max())):
        i, j = np.unravel_index(np.argmax(slack), slack.shape)
        raise ModulusError(
            f"|g({t[i]:.6g}) - g({t[j]:.6g})| = {dg[i, j]:.6g} exceeds "
            f"{C} * omega({dt[i, j]:.6g}) = {bound[i, j]:.6g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, dg / bound, 0.0)
    return float(ratio.max())


def from_boundary_graph(t, g, side: str, m: Modulus, C: float, grid: GridGeometry,
                        *, floor: float | None = None, xmin: float | None = None,
                        xmax: float | None = None) -> RasterSet:
    """Raster of the region bounded by the graph of ``g`` after checking
    ``|g(a) - g(b)| <= C omega(|a - b|)`` on all sample pairs.

    Defaults clip the region to the box minus a one-cell frame.
    """
    validate_graph_modulus(t, g, m, C)
    h = grid.h
    lo_x, hi_x = grid.x0 + h, grid.x0 + grid.side - h
    if floor is None:
        floor = grid.y0 + h if side == "below" else grid.y0 + grid.side - h
    shape = BoundaryGraph(tuple(map(float, t)), tuple(map(float, g)), side, float(floor),
                          lo_x if xmin is None else xmin, hi_x if xmax is None else xmax)
    return rasterize(shape, grid)


def shape_from_config(cfg: dict) -> Shape:
    kind = cfg["kind"]
    if kind == "disk":
        return Disk(float(cfg["center"][0]), float(cfg["center"][1]), float(cfg["radius"]))
    if kind == "rectangle":
        lo, hi = cfg["min"], cfg["max"]
        return Rectangle(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    if kind == "polygon":
        return Polygon(tuple((float(a), float(b)) for a, b in cfg["vertices"]))
    if kind == "graph":
        return BoundaryGraph(tuple(map(float, cfg["t"])), tuple(map(float, cfg["g"])),
                             cfg.get("side", "below"), float(cfg.get("floor", 0.0)),
                             float(cfg.get("xmin", 0.0)), float(cfg.get("xmax", 1.0)))
    if kind in ("union", "intersection"):
        parts = tuple(shape_from_config(p) for p in cfg["parts"])
        return Union(parts) if kind == "union" else Intersection(parts)
    if kind == "difference":
        return Difference(shape_from_config(cfg["a"]), shape_from_config(cfg["b"]))
    if kind == "offset":
        return shape_from_config(cfg["base"]).offset(float(cfg["delta"]))
    if kind == "translate":
        return shape_from_config(cfg["base"]).translate(*map(float, cfg["by"]))
    raise DomainError(f"unknown shape kind {kind!r}")


__all__ = [
    "Shape", "Disk", "Rectangle", "Polygon", "Offset", "Translated", "Union",
    "Intersection", "Difference", "BoundaryGraph", "rasterize", "from_boundary_graph",
    "validate_graph_modulus", "shape_from_config", "EmptyDomain",
]
