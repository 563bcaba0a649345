"""Uniform cell grids over a square box and the bitmask sets living on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import DomainError, EmptyDomain, MarginError

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class GridGeometry:
    """Square box ``[x0, x0+side] x [y0, y0+side]`` split into ``n x n`` cells.

    Cell ``(i, j)`` has center ``(x0 + (i + 1/2) h, y0 + (j + 1/2) h)``; the first
    array axis is x.  Nodes ``(i, j)`` sit at ``(x0 + i h, y0 + j h)``, ``0 <= i, j <= n``.
    """

    n: int
    side: float = 1.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("grid needs at least 2 cells per side")
        if not self.side > 0:
            raise DomainError("box side must be positive")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_spacing(cls, h: float, side: float = 1.0, x0: float = 0.0, y0: float = 0.0):
        n = round(side / h)
        if abs(n * h - side) > 1e-9 * side:
            raise DomainError(f"spacing {h} does not tile side {side}")
        return cls(n, side, x0, y0)

    @classmethod
    def from_config(cls, cfg: dict) -> "GridGeometry":
        origin = cfg.get("origin", [0.0, 0.0])
        return cls(int(cfg["resolution"]), float(cfg.get("side", 1.0)),
                   float(origin[0]), float(origin[1]))

    def to_config(self) -> dict:
        return {"origin": [self.x0, self.y0], "side": self.side, "resolution": self.n}

    @property
    def h(self) -> float:
        return self.side / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def tolerance(self) -> float:
        """Quantization tolerance 2 h sqrt(2) quoted by geometric assertions."""
        return 2.0 * self.h * np.sqrt(2.0)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(self.x0 + c, self.y0 + c, indexing="ij")

    def cell_center(self, i, j) -> np.ndarray:
        return np.array([self.x0 + (i + 0.5) * self.h, self.y0 + (j + 0.5) * self.h])

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        i = int(np.floor((x - self.x0) / self.h))
        j = int(np.floor((y - self.y0) / self.h))
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise DomainError(f"point ({x}, {y}) outside the box")
        return i, j

    def refined(self, factor: int = 2) -> "GridGeometry":
        return GridGeometry(self.n * factor, self.side, self.x0, self.y0)


@dataclass(frozen=True, eq=False)
class RasterSet:
    """Open set given as the union of the grid cells flagged in ``mask``.

    Sets built by :func:`rasterize`, :func:`dilate` and friends keep at least one
    free cell along the box frame.  ``RasterSet.full`` is the one exception: it is
    the ambient box itself and is only meant for Dirichlet problems on the box.
    """

    grid: GridGeometry
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise DomainError(f"mask shape {m.shape} != grid shape {self.grid.shape}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def full(cls, grid: GridGeometry) -> "RasterSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid: GridGeometry) -> "RasterSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    def __eq__(self, other):
        return (isinstance(other, RasterSet) and self.grid == other.grid
                and np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    def __len__(self):
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def area(self) -> float:
        return len(self) * self.grid.h ** 2

    def touches_frame(self) -> bool:
        m = self.mask
        return bool(m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any())

    def check_margin(self) -> "RasterSet":
        if self.touches_frame():
            raise MarginError("set touches the outer frame of the box")
        return self

    def require_nonempty(self) -> "RasterSet":
        if self.is_empty:
            raise EmptyDomain("raster set is empty")
        return self

    def samples(self) -> np.ndarray:
        """Cell centers of the set, shape ``(k, 2)``."""
        X, Y = self.grid.centers()
        return np.column_stack([X[self.mask], Y[self.mask]])

    def _same_grid(self, other: "RasterSet"):
        if self.grid != other.grid:
            raise DomainError("raster sets live on different grids")

    def complement(self) -> "RasterSet":
        return RasterSet(self.grid, ~self.mask)

    def __or__(self, other):
        self._same_grid(other)
        return RasterSet(self.grid, self.mask | other.mask)

    def __and__(self, other):
        self._same_grid(other)
        return RasterSet(self.grid, self.mask & other.mask)

    def __sub__(self, other):
        self._same_grid(other)
        return RasterSet(self.grid, self.mask & ~other.mask)

    def __xor__(self, other):
        self._same_grid(other)
        return RasterSet(self.grid, self.mask ^ other.mask)

    def issubset(self, other: "RasterSet") -> bool:
        self._same_grid(other)
        return not np.any(self.mask & ~other.mask)

    def boundary(self) -> "RasterSet":
        """Cells of the set with a complement 8-neighbour, plus complement cells
        with an 8-neighbour in the set.  Space outside the box counts as complement."""
        m = np.pad(self.mask, 1, constant_values=False)
        inner = m & ndimage.binary_dilation(~m, structure=_EIGHT)
        outer = ~m & ndimage.binary_dilation(m, structure=_EIGHT)
        return RasterSet(self.grid, (inner | outer)[1:-1, 1:-1])
