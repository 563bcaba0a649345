"""Raster sets, moduli of continuity, morphology, Hausdorff-type distances and
the sampled omega-cusp condition."""

from .cusp import CuspCone, CuspReport, cone_contains, cusp_check, cusp_verdicts, lattice_directions
from .distances import HausdorffDistances, boundary_excess, co_gap, gap, hausdorff_distances
from .modulus import Modulus, modulus_eval, phi, phi_inv, phi_psi, psi, psi_inv
from .morphology import dilate, erode, in_dilation, point_distance
from .raster import GridGeometry, RasterSet
from .shapes import (BoundaryGraph, Disk, Polygon, Rectangle, Shape, from_boundary_graph,
                     rasterize, shape_from_config)

__all__ = [
    "BoundaryGraph", "CuspCone", "CuspReport", "Disk", "GridGeometry", "HausdorffDistances",
    "Modulus", "Polygon", "RasterSet", "Rectangle", "Shape", "boundary_excess", "co_gap",
    "cone_contains", "cusp_check", "cusp_verdicts", "dilate", "erode", "from_boundary_graph",
    "gap", "hausdorff_distances", "in_dilation", "lattice_directions", "modulus_eval", "phi",
    "phi_inv", "phi_psi", "point_distance", "psi", "psi_inv", "rasterize", "shape_from_config",
]
