"""Stability-rate sweeps over perturbation families.

Every sweep re-measures the perturbation size from the rasters and, unless
disabled, repeats the computation on the refined grid ``h/2``.  A member whose
measured discrete quantity moves by more than 10% under refinement is flagged;
flags raise ResolutionError unless ``on_flag="record"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, GapError, NumericsError, ResolutionError
from ..fem import CoefficientField, assemble, dual_norms, restrict, solve_dirichlet
from ..geometry.cusp import cusp_check
from ..geometry.distances import boundary_excess, hausdorff_distances
from ..geometry.modulus import modulus_eval, phi, phi_inv, psi
from ..spectral import SubspaceHandle, eigens, generalized_angle, riesz_indices
from .families import PerturbationFamily
from .fitting import fit_slope
from .records import SweepRecord, SweepResult

RESOLUTION_TOL = 0.10


def _levels(fam: PerturbationFamily, resolution_check: bool):
    return [fam.grid, fam.grid.refined()] if resolution_check else [fam.grid]


def _check_base(fam: PerturbationFamily, cusp_r: float | None) -> None:
    if cusp_r is None:
        return
    rep = cusp_check(fam.base_raster(), fam.modulus, cusp_r, with_pairs=False)
    if not rep.passed:
        raise DomainError(f"base domain fails the cusp check with r={cusp_r}")


def _measure(base, member):
    hd = hausdorff_distances(base, member)
    return hd, boundary_excess(base, member, base)


def _rel_change(coarse: float, fine: float) -> float:
    if coarse == fine:
        return 0.0
    return abs(coarse - fine) / max(abs(fine), abs(coarse))


def _flag(flags: list, on_flag: str, what: str) -> None:
    if flags and on_flag == "raise":
        eps = ", ".join(f"{e:.6g}" for e in flags)
        raise ResolutionError(f"{what} changes by more than {RESOLUTION_TOL:.0%} "
                              f"under refinement at eps = {eps}")


def _safe_fit(x, y):
    pts = [(a, b) for a, b in zip(x, y) if a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)]
    if len(pts) < 3:
        return None
    return fit_slope([p[0] for p in pts], [p[1] for p in pts])


def default_delta0(fam: PerturbationFamily, r: float) -> float:
    """Smallness knob ``phi^-1(psi(r) / 4)``."""
    return float(phi_inv(fam.modulus, float(psi(fam.modulus, r)) / 4))


def _fits(records, fits_spec):
    out = {}
    for name, (xkey, ykey, xfun) in fits_spec.items():
        fit = _safe_fit([xfun(rec[xkey]) for rec in records], [rec[ykey] for rec in records])
        if fit is not None:
            out[name] = fit
    return out


def eigen_stability_sweep(fam: PerturbationFamily, coeff: CoefficientField | None = None,
                          n_max: int = 1, *, resolution_check: bool = True,
                          cusp_r: float | None = 0.05, on_flag: str = "raise",
                          seed: int = 0) -> SweepResult:
    """``|lambda_n(base) - lambda_n(member)|`` for every schedule entry.

    The rate fit uses ``omega(d) + d`` with ``d = d^HP`` measured on the rasters.
    """
    coeff = coeff or CoefficientField.identity()
    _check_base(fam, cusp_r)
    m = fam.modulus
    per_level = []
    for grid in _levels(fam, resolution_check):
        amb = assemble(grid, coeff, compute_p=False)
        base = fam.base_raster(grid)
        lam1 = eigens(restrict(amb, base), n_max, seed=seed).values
        rows = []
        for eps, member in fam.members(grid):
            lam2 = eigens(restrict(amb, member), n_max, seed=seed).values
            hd, bg = _measure(base, member)
            rows.append((eps, hd, bg, lam1, lam2))
        per_level.append(rows)

    records, flagged = [], []
    monotone = True
    for idx, (eps, hd, bg, lam1, lam2) in enumerate(per_level[0]):
        dlam = np.abs(lam2 - lam1)
        scale = float(modulus_eval(m, hd.d_HP)) + hd.d_HP
        vals = {}
        for n in range(n_max):
            vals[f"lambda1_{n + 1}"] = float(lam1[n])
            vals[f"lambda2_{n + 1}"] = float(lam2[n])
            vals[f"dlambda_{n + 1}"] = float(dlam[n])
            vals[f"ratio_{n + 1}"] = float(dlam[n] / scale) if scale > 0 else 0.0
        if fam.kind == "erode" and np.any(lam2 < lam1 * (1 - 1e-10)):
            monotone = False
        if fam.kind == "dilate" and np.any(lam2 > lam1 * (1 + 1e-10)):
            monotone = False
        if len(per_level) > 1:
            _, _, _, f1, f2 = per_level[1][idx]
            fine = np.abs(f2 - f1)
            worst = 0.0
            for n in range(n_max):
                vals[f"dlambda_{n + 1}_fine"] = float(fine[n])
                worst = max(worst, _rel_change(float(dlam[n]), float(fine[n])))
            vals["resolution_change"] = worst
            vals["resolution_flag"] = worst > RESOLUTION_TOL
            if worst > RESOLUTION_TOL:
                flagged.append(eps)
        records.append(SweepRecord.build(eps, hd, bg, **vals))
    if not monotone:
        raise NumericsError("domain monotonicity violated inside the sweep")
    _flag(flagged, on_flag, "|dlambda|")
    records.sort(key=lambda r: r.eps)

    fits = _fits(records, {
        "dlambda_1_vs_omega_plus_eps": ("d_HP", "dlambda_1", lambda d: float(modulus_eval(m, d)) + d),
        "dlambda_1_vs_eps": ("d_HP", "dlambda_1", lambda d: d),
    })
    constants = {f"C_hat_{n + 1}": max(rec[f"ratio_{n + 1}"] for rec in records)
                 for n in range(n_max)}
    return SweepResult("eigen", tuple(records), fits, constants,
                       {"monotone": monotone, "resolution_flags": len(flagged)})


def _ratio(num: float, den: float) -> float:
    if num == 0:
        return 0.0
    return num / den if den > 0 else math.inf


def resolvent_sweep(fam: PerturbationFamily, coeff: CoefficientField | None = None, f=None, *,
                    resolution_check: bool = True, cusp_r: float | None = 0.05,
                    on_flag: str = "raise", delta0: float | None = None) -> SweepResult:
    """Defect ``||u1 - u2||_V^2`` of the two Dirichlet solutions and its ratio to
    ``phi(eps) ||f||_{L'} ||f||_{V'}`` for ``eps = e(delta, boundary of base)`` and
    for ``eps = d_HS``."""
    coeff = coeff or CoefficientField.identity()
    f = f if f is not None else (lambda x, y: np.ones_like(x))
    _check_base(fam, cusp_r)
    m = fam.modulus
    if delta0 is None:
        delta0 = default_delta0(fam, cusp_r) if cusp_r else math.inf

    per_level = []
    for grid in _levels(fam, resolution_check):
        amb = assemble(grid, coeff)
        base = fam.base_raster(grid)
        u1 = solve_dirichlet(restrict(amb, base), f).ambient
        dn = dual_norms(amb, f)
        rows = []
        for eps, member in fam.members(grid):
            u2 = solve_dirichlet(restrict(amb, member), f).ambient
            d = u1 - u2
            defect_sq = max(float(d @ (amb.K @ d)), 0.0)
            hd, bg = _measure(base, member)
            rows.append((eps, hd, bg, defect_sq, dn))
        per_level.append(rows)

    def ratios(defect_sq, hd, bg, dn):
        prod = dn.L_dual * dn.V_dual
        b1 = float(phi(m, bg)) * prod
        b2 = float(phi(m, hd.d_HS)) * prod
        return b1, _ratio(defect_sq, b1), b2, _ratio(defect_sq, b2)

    records, flagged = [], []
    for idx, (eps, hd, bg, defect_sq, dn) in enumerate(per_level[0]):
        b1, g1, b2, g2 = ratios(defect_sq, hd, bg, dn)
        vals = {"defect_sq": defect_sq, "defect": math.sqrt(defect_sq),
                "f_V_dual": dn.V_dual, "f_L_dual": dn.L_dual,
                "bound": b1, "ratio": g1, "bound_hs": b2, "ratio_hs": g2,
                "below_delta0": bg <= delta0}
        if len(per_level) > 1:
            _, hdf, bgf, dsf, dnf = per_level[1][idx]
            _, gf1, _, gf2 = ratios(dsf, hdf, bgf, dnf)
            change = _rel_change(defect_sq, dsf)
            vals.update({"defect_sq_fine": dsf, "ratio_fine": gf1, "ratio_hs_fine": gf2,
                         "boundary_gap_fine": bgf, "resolution_change": change,
                         "resolution_flag": change > RESOLUTION_TOL})
            if change > RESOLUTION_TOL:
                flagged.append(eps)
        records.append(SweepRecord.build(eps, hd, bg, **vals))
    _flag(flagged, on_flag, "||u1 - u2||_V^2")
    records.sort(key=lambda r: r.eps)

    constants = {}
    keys = ["ratio", "ratio_hs"] + (["ratio_fine", "ratio_hs_fine"] if resolution_check else [])
    for key in keys:
        col = [rec[key] for rec in records]
        constants[f"gamma_hat_{key}"] = max(col)
        constants[f"gamma_median_{key}"] = float(np.median(col))
    bounded = all(constants[f"gamma_hat_{k}"] <= 1.5 * constants[f"gamma_median_{k}"]
                  for k in keys)
    fits = _fits(records, {"defect_sq_vs_phi": ("boundary_gap", "defect_sq",
                                                lambda d: float(phi(m, d)))})
    return SweepResult("resolvent", tuple(records), fits,
                       {**constants, "delta0": delta0},
                       {"bounded": bounded, "resolution_flags": len(flagged)})


def _cluster_span(res, c: int) -> list[int]:
    return [int(i) for i in np.flatnonzero(res.clusters == c)]


def _eigens_through(sys, need_label: int, start: int, seed: int):
    """Eigenpairs until cluster ``need_label`` is complete (a later cluster appears)."""
    k = min(start, sys.ndof)
    while True:
        res = eigens(sys, k, seed=seed)
        if res.clusters[-1] > need_label or k == sys.ndof:
            return res
        k = min(k + 4, sys.ndof)


def _eigens_below(sys, lam_max: float, start: int, seed: int):
    """Eigenpairs until the largest one reaches ``lam_max``."""
    k = min(start, sys.ndof)
    while True:
        res = eigens(sys, k, seed=seed)
        if res.values[-1] >= lam_max or k == sys.ndof:
            return res
        k = min(k + 4, sys.ndof)


def gap_radius(values: np.ndarray, clusters: np.ndarray, c: int) -> tuple[float, float]:
    """``(nu_k, distance to the nearest other inverse eigenvalue)`` of cluster ``c``."""
    nu = 1.0 / values
    nu_k = float(np.mean(nu[clusters == c]))
    others = nu[clusters != c]
    return nu_k, float(np.min(np.abs(others - nu_k))) if len(others) else math.inf


def angle_sweep(fam: PerturbationFamily, coeff: CoefficientField | None = None, k: int = 1,
                radius: float | None = None, *, resolution_check: bool = True,
                cusp_r: float | None = 0.05, on_flag: str = "raise", seed: int = 0,
                norm: str = "V") -> SweepResult:
    """Generalized angle between the k-th eigenspace of the base (k-th distinct
    eigenvalue, ascending) and the Riesz span of each member over the disk
    ``|1/lambda - nu_k| < radius``.

    The rate fit uses ``phi(d^HP)``; a fit against ``phi(e(delta, boundary))``
    is reported alongside.
    """
    if k < 1:
        raise DomainError("cluster index k starts at 1")
    coeff = coeff or CoefficientField.identity()
    _check_base(fam, cusp_r)
    m = fam.modulus
    c = k - 1
    per_level = []
    for grid in _levels(fam, resolution_check):
        amb = assemble(grid, coeff, compute_p=False)
        base = fam.base_raster(grid)
        res1 = _eigens_through(restrict(amb, base), c + 1, k + 3, seed)
        nu_k, gap = gap_radius(res1.values, res1.clusters, c)
        r = 0.5 * gap if radius is None else radius
        if not 2 * r <= gap:
            raise GapError(f"disk of radius 2r={2 * r:.6g} around nu_k={nu_k:.6g} "
                           f"meets another eigenvalue (gap {gap:.6g})")
        E1 = SubspaceHandle.from_eigen(res1, _cluster_span(res1, c))
        rows = []
        for eps, member in fam.members(grid):
            sys2 = restrict(amb, member)
            lam_hi = 1.0 / (nu_k - r) if nu_k > r else math.inf
            res2 = _eigens_below(sys2, lam_hi, len(res1.values) + 2, seed)
            idx = riesz_indices(res2.values, nu_k, r)
            if idx:
                angle = generalized_angle(E1, SubspaceHandle.from_eigen(res2, idx), norm)
            else:
                angle = 1.0
            hd, bg = _measure(base, member)
            rows.append((eps, hd, bg, angle, len(idx), E1.dim))
        per_level.append((rows, nu_k, r))

    records, flagged = [], []
    rows0, nu_k, r = per_level[0]
    for idx, (eps, hd, bg, angle, dim2, dim1) in enumerate(rows0):
        vals = {"angle": angle, "dim_base": dim1, "dim_member": dim2}
        if len(per_level) > 1:
            af = per_level[1][0][idx][3]
            change = _rel_change(angle, af)
            vals.update({"angle_fine": af, "resolution_change": change,
                         "resolution_flag": change > RESOLUTION_TOL})
            if change > RESOLUTION_TOL:
                flagged.append(eps)
        records.append(SweepRecord.build(eps, hd, bg, **vals))
    _flag(flagged, on_flag, "the eigenspace angle")
    records.sort(key=lambda rec: rec.eps)
    angles = [rec["angle"] for rec in records]
    monotone = all(b >= a for a, b in zip(angles, angles[1:]))
    fits = _fits(records, {
        "angle_vs_phi_dHP": ("d_HP", "angle", lambda d: float(phi(m, d))),
        "angle_vs_phi_boundary_gap": ("boundary_gap", "angle", lambda d: float(phi(m, d))),
    })
    return SweepResult("angle", tuple(records), fits,
                       {"nu_k": nu_k, "radius": r, "max_angle": max(angles)},
                       {"monotone": monotone, "resolution_flags": len(flagged)})


@dataclass(frozen=True)
class AnalyticSquare:
    """Closed-form Dirichlet data of the unit square (identity coefficient)."""

    @staticmethod
    def lambda1_eroded(eps: float) -> float:
        return 2 * math.pi ** 2 / (1 - 2 * eps) ** 2

    @staticmethod
    def dlambda1(eps: float) -> float:
        return 2 * math.pi ** 2 * (1 / (1 - 2 * eps) ** 2 - 1)
