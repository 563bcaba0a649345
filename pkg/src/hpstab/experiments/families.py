"""One-parameter families of perturbed domains."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..geometry.modulus import Modulus
from ..geometry.raster import GridGeometry, RasterSet
from ..geometry.shapes import Rectangle, Shape, from_boundary_graph, rasterize

KINDS = ("erode", "dilate", "translate", "bump")


def bump_profile(s, profile: str = "lipschitz", exponent: float = 1.0):
    """Unit bump on ``|s| < 1`` peaking at ``s = 0``.

    ``lipschitz`` is the tent ``1 - |s|``; ``hoelder`` is ``1 - |s|**exponent``,
    whose modulus at the peak is exactly ``r**exponent``.
    """
    a = np.minimum(np.abs(np.asarray(s, dtype=float)), 1.0)
    if profile == "lipschitz":
        return 1.0 - a
    if profile == "hoelder":
        return 1.0 - a ** exponent
    raise DomainError(f"unknown bump profile {profile!r}")


@dataclass(frozen=True)
class PerturbationFamily:
    """Base shape plus a perturbation of size ``eps`` for every ``eps`` in ``schedule``.

    * ``erode`` / ``dilate``: exact offsets of the base shape.
    * ``translate``: shift by ``eps`` along ``params["direction"]`` (default +x).
    * ``bump``: the top edge of a rectangular base is replaced by
      ``ymax - sign * eps * b((x - center) / width)``, built through
      ``from_boundary_graph`` so its modulus is certified; ``params`` holds
      ``center``, ``width``, ``profile``, ``exponent`` and ``inward``.
    """

    base: Shape
    kind: str
    schedule: tuple
    grid: GridGeometry
    modulus: Modulus = field(default_factory=lambda: Modulus.lipschitz(1.0))
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown family kind {self.kind!r}")
        sched = tuple(float(e) for e in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if not sched:
            raise DomainError("empty schedule")
        if any(e <= 0 for e in sched):
            raise DomainError("schedule entries must be positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise DomainError("schedule must be strictly decreasing")
        if self.kind in ("erode", "dilate") and not self.base.exact_sdf:
            raise DomainError("offset families need a base shape with an exact signed distance")
        if self.kind == "bump" and not isinstance(self.base, Rectangle):
            raise DomainError("bump families need a rectangular base")

    def base_raster(self, grid: GridGeometry | None = None) -> RasterSet:
        return rasterize(self.base, grid or self.grid)

    def shape(self, eps: float) -> Shape:
        if self.kind == "erode":
            return self.base.offset(-eps)
        if self.kind == "dilate":
            return self.base.offset(eps)
        if self.kind == "translate":
            d = np.asarray(self.params.get("direction", (1.0, 0.0)), dtype=float)
            d = d / np.linalg.norm(d)
            return self.base.translate(eps * d[0], eps * d[1])
        raise DomainError("bump members are rasters built from a graph, not shapes")

    def member(self, eps: float, grid: GridGeometry | None = None) -> RasterSet:
        grid = grid or self.grid
        if eps < 0:
            raise DomainError("perturbation size must be nonnegative")
        if eps == 0:
            return self.base_raster(grid)
        if self.kind == "bump":
            return self._bump(eps, grid)
        return rasterize(self.shape(eps), grid)

    def members(self, grid: GridGeometry | None = None) -> list[tuple[float, RasterSet]]:
        return [(e, self.member(e, grid)) for e in self.schedule]

    def bump_constant(self, eps: float) -> float:
        """C with ``|g(a) - g(b)| <= C omega(|a - b|)`` for the bump of size ``eps``."""
        width = float(self.params.get("width", 0.25))
        profile = self.params.get("profile", "lipschitz")
        expo = 1.0 if profile == "lipschitz" else float(self.params.get("exponent", 0.5))
        m = self.modulus
        if m.kind == "lipschitz" and expo == 1.0:
            return eps / (width * m.L) * (1 + 1e-9)
        if m.kind == "hoelder" and abs(m.alpha - expo) < 1e-12:
            return eps / (width ** expo * m.L) * (1 + 1e-9)
        raise DomainError("family modulus does not match the bump profile")

    def _bump(self, eps: float, grid: GridGeometry) -> RasterSet:
        b: Rectangle = self.base
        center = float(self.params.get("center", 0.5 * (b.xmin + b.xmax)))
        width = float(self.params.get("width", 0.25))
        profile = self.params.get("profile", "lipschitz")
        expo = float(self.params.get("exponent", 0.5))
        sign = 1.0 if self.params.get("inward", True) else -1.0
        t = np.union1d(np.linspace(b.xmin, b.xmax, 8 * grid.n + 1),
                       [center - width, center, center + width])
        t = t[(t >= b.xmin) & (t <= b.xmax)]
        g = b.ymax - sign * eps * bump_profile((t - center) / width, profile, expo)
        return from_boundary_graph(t, g, "below", self.modulus, self.bump_constant(eps), grid,
                                   floor=b.ymin, xmin=b.xmin, xmax=b.xmax)

    @classmethod
    def from_config(cls, cfg: dict, base: Shape, grid: GridGeometry,
                    modulus: Modulus) -> "PerturbationFamily":
        params = {k: v for k, v in cfg.items() if k not in ("kind", "schedule")}
        return cls(base, cfg["kind"], tuple(cfg["schedule"]), grid, modulus, params)


def unit_square_grid(h: float = 1 / 192, margin: float = 1 / 16) -> GridGeometry:
    """Box ``[-margin, 1 + margin]^2`` with spacing ``h`` (must tile the box)."""
    side = 1.0 + 2 * margin
    n = round(side / h)
    if abs(n * h - side) > 1e-9 * side:
        raise DomainError(f"spacing {h} does not tile a box of side {side}")
    return GridGeometry(n, side, -margin, -margin)


def unit_square() -> Rectangle:
    return Rectangle(0.0, 0.0, 1.0, 1.0)


ERODE_SCHEDULE = (1 / 16, 1 / 24, 1 / 32, 1 / 48, 1 / 64)


def check_exact_offsets(schedule, h: float) -> bool:
    """True when every schedule entry is an integer number of cells."""
    return all(abs(e / h - round(e / h)) < 1e-9 for e in schedule)


__all__ = ["PerturbationFamily", "bump_profile", "unit_square_grid", "unit_square",
           "ERODE_SCHEDULE", "check_exact_offsets"]
