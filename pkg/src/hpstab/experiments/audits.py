"""Inequality audits: solution-distance estimates, the eigenvalue projection
bound, and the geometric lemmas on raster sets."""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as sla

from ..errors import EmptyDomain, InapplicableError
from ..fem import AmbientSystem, CoefficientField, assemble, restrict, solve_dirichlet
from ..geometry.cusp import CuspCone, _cone_mask, cusp_check, cusp_distances, cusp_verdicts
from ..geometry.distances import co_gap, gap, hausdorff_distances
from ..geometry.modulus import Modulus, phi, phi_inv, psi, psi_inv
from ..geometry.morphology import dilate, erode, point_distance
from ..geometry.raster import GridGeometry, RasterSet
from ..geometry.shapes import Disk, Rectangle, rasterize
from ..spectral import eigens, project_energy
from .records import AuditReport

RASTER_TOL_FACTOR = 2 * math.sqrt(2)
ROUNDOFF = 1e-10


def _dist(amb: AmbientSystem, u, space, norm: str) -> float:
    d = u - project_energy(amb, u, space, norm)
    return math.sqrt(max(float(d @ (amb.form(norm) @ d)), 0.0))


def _norm(amb: AmbientSystem, u, norm: str) -> float:
    return math.sqrt(max(float(u @ (amb.form(norm) @ u)), 0.0))


def savare_checks(omega1: RasterSet, omega2: RasterSet, amb: AmbientSystem, f) -> list[dict]:
    """All solution-distance inequalities for one ``(omega1, omega2, f)``.

    Each inequality is checked in the plain gradient norm with the measured
    ellipticity bounds ``(alpha, beta)`` and in the operator energy norm with
    ``alpha = beta = 1``.  ``slack`` is ``(rhs - lhs)`` relative to the size of
    the solutions, so nested domains, where the first estimate is an equality,
    show slack at roundoff level.  Rows with ``counted = False`` are diagnostics.
    """
    inter = omega1 & omega2
    sys1, sys2 = restrict(amb, omega1), restrict(amb, omega2)
    sys12 = restrict(amb, inter)
    u1 = solve_dirichlet(sys1, f).ambient
    u2 = solve_dirichlet(sys2, f).ambient
    eps = gap(omega2, omega1)
    eta = gap(omega1, omega2)
    union = omega1 | omega2
    # spaces containing both V1 and V2: the raster union and the dilations used
    # in the resolvent estimate (completed by the other set so sampling at the
    # dilation radius cannot drop a sample)
    grow1 = dilate(omega1, eps, check_margin=False) | omega2
    grow2 = dilate(omega2, eta, check_margin=False) | omega1
    box = RasterSet.full(omega1.grid)
    big = {"union": union, "dilate1": grow1, "dilate2": grow2, "box": box}
    sols = {name: solve_dirichlet(restrict(amb, s), f).ambient for name, s in big.items()}
    u_inter = solve_dirichlet(sys12, f).ambient

    lo, hi = amb.eig_bounds
    rows = []
    for norm, alpha, beta in (("H1", lo, hi), ("V", 1.0, 1.0)):
        lhs = _norm(amb, u1 - u2, norm)
        scale = max(lhs, _norm(amb, u1, norm), _norm(amb, u2, norm), 1e-300)
        c8 = math.sqrt(beta / alpha)

        def add(name, rhs, counted=True):
            rows.append({"check": name, "norm": norm, "lhs": lhs, "rhs": rhs,
                         "slack": (rhs - lhs) / scale, "counted": counted})

        add("solution_gap", c8 * (_dist(amb, u1, sys12, norm) + _dist(amb, u2, sys12, norm)))
        for name, u12 in sols.items():
            add(f"superset[{name}]", c8 * (_dist(amb, u12, sys1, norm) + _dist(amb, u12, sys2, norm)))
        for n12, n21 in (("dilate1", "dilate2"), ("union", "union"), ("union", "box")):
            add(f"superset_pair[{n12},{n21}]", beta / alpha * (_dist(amb, sols[n12], sys1, norm)
                                                        + _dist(amb, sols[n21], sys2, norm)))
        add("superset[intersection]", c8 * (_dist(amb, u_inter, sys1, norm)
                                       + _dist(amb, u_inter, sys2, norm)), counted=False)
    return rows


def audit_savare(omega1: RasterSet, omega2: RasterSet, coeff: CoefficientField | None = None,
                 f=None, *, amb: AmbientSystem | None = None, seed: int | None = None,
                 name: str = "savare") -> AuditReport:
    coeff = coeff or CoefficientField.identity()
    f = f if f is not None else (lambda x, y: np.ones_like(x))
    amb = amb or assemble(omega1.grid, coeff)
    if not interior_nonempty(amb, omega1 & omega2):
        raise EmptyDomain("the intersection has no interior nodes")
    rows = savare_checks(omega1, omega2, amb, f)
    counted = [r["slack"] for r in rows if r["counted"]]
    return AuditReport(name, 1, min(counted), ROUNDOFF, seed, 0, tuple(rows))


def interior_nonempty(amb: AmbientSystem, omega: RasterSet) -> bool:
    try:
        restrict(amb, omega)
    except EmptyDomain:
        return False
    return True


def birkhoff_quantities(omega1: RasterSet, omega2: RasterSet, amb: AmbientSystem, n: int,
                        seed: int = 0) -> dict:
    """Smallest admissible ``A_n, B_n`` over the span of the first ``n``
    eigenfunctions of ``omega1``, with the projection taken onto the space of
    ``omega2``, and the eigenvalue bound they imply."""
    p = amb.p
    res1 = eigens(restrict(amb, omega1), n, seed=seed)
    res2 = eigens(restrict(amb, omega2), n, seed=seed)
    U = res1.ambient_vectors()
    W = project_energy(amb, U, restrict(amb, omega2)) - U
    GL = p * (U.T @ (amb.M @ U))
    DV = W.T @ (amb.K @ W)
    DL = p * (W.T @ (amb.M @ W))
    sym = lambda X: 0.5 * (X + X.T)  # noqa: E731
    A_n = max(float(sla.eigh(sym(DV), sym(GL), eigvals_only=True)[-1]), 0.0)
    B_n = max(float(sla.eigh(sym(DL), sym(GL), eigvals_only=True)[-1]), 0.0)
    lam1, lam2 = float(res1.values[n - 1]), float(res2.values[n - 1])
    out = {"n": n, "p": p, "A_n": A_n, "B_n": B_n, "lambda1": lam1, "lambda2": lam2,
           "applicable": B_n < p}
    if B_n < p:
        bound = lam2 - A_n / ((math.sqrt(p) - math.sqrt(B_n)) ** 2 * p)
        out.update(bound=bound, slack=lam1 - bound)
    return out


def audit_birkhoff(omega1: RasterSet, omega2: RasterSet, coeff: CoefficientField | None = None,
                   n: int = 1, *, amb: AmbientSystem | None = None, seed: int = 0) -> AuditReport:
    """Checks ``lambda_n(omega1) >= lambda_n(omega2) - A_n / ((sqrt p - sqrt B_n)^2 p)``.

    Raises InapplicableError when ``B_n >= p`` (the hypothesis fails)."""
    coeff = coeff or CoefficientField.identity()
    amb = amb or assemble(omega1.grid, coeff)
    q = birkhoff_quantities(omega1, omega2, amb, n, seed)
    if not q["applicable"]:
        raise InapplicableError(f"B_n = {q['B_n']:.6g} is not below p = {q['p']:.6g}")
    tol = ROUNDOFF * max(abs(q["lambda1"]), 1.0)
    return AuditReport("birkhoff", 1, q["slack"], tol, seed, 0, (q,))


# ---------------------------------------------------------------------------
# geometric suites

SUITES = ("dilated_cusp", "ball_in_cone", "shifted_exterior", "co_gap_bound", "w1w2", "metric")
NEEDS_VANISHING_MODULUS = ("dilated_cusp", "ball_in_cone", "shifted_exterior", "co_gap_bound")


def default_audit_grid() -> GridGeometry:
    return GridGeometry(96, 1.0)


def random_modulus(rng: np.random.Generator, lipschitz_only: bool = False) -> Modulus:
    if lipschitz_only or rng.random() < 0.5:
        return Modulus.lipschitz(float(rng.uniform(0.5, 1.5)))
    return Modulus.hoelder(float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.3, 1.0)))


def random_base(rng: np.random.Generator, grid: GridGeometry) -> RasterSet:
    """Rectangle, disk, or union of two of them, well inside the unit box."""
    def one():
        if rng.random() < 0.5:
            return Disk(*map(float, rng.uniform(0.4, 0.6, 2)), float(rng.uniform(0.15, 0.3)))
        c = rng.uniform(0.4, 0.6, 2)
        w = rng.uniform(0.1, 0.3, 2)
        return Rectangle(float(c[0] - w[0]), float(c[1] - w[1]),
                         float(c[0] + w[0]), float(c[1] + w[1]))
    s = one()
    if rng.random() < 0.4:
        s = s | one()
    return rasterize(s, grid)


def random_blob(rng: np.random.Generator, grid: GridGeometry) -> RasterSet:
    """Union of up to three disks/rectangles anywhere away from the frame."""
    parts = []
    for _ in range(int(rng.integers(1, 4))):
        if rng.random() < 0.5:
            parts.append(Disk(*map(float, rng.uniform(0.3, 0.7, 2)), float(rng.uniform(0.08, 0.25))))
        else:
            c = rng.uniform(0.3, 0.7, 2)
            w = rng.uniform(0.05, 0.25, 2)
            parts.append(Rectangle(float(c[0] - w[0]), float(c[1] - w[1]),
                                   float(c[0] + w[0]), float(c[1] + w[1])))
    s = parts[0]
    for p in parts[1:]:
        s = s | p
    return rasterize(s, grid)


def _passing_point(X: RasterSet, m: Modulus, r: float, rng):
    rep = cusp_check(X, m, r, with_pairs=False)
    ok = [rec for rec in rep.records if rec.xi is not None]
    if not ok:
        return None, rep
    return ok[int(rng.integers(len(ok)))], rep


def _radius(rng, m: Modulus, grid: GridGeometry) -> float:
    r = float(rng.uniform(3 * grid.h, 0.06))
    while float(psi(m, r)) > grid.side / 6:
        r *= 0.5
    return r


def _suite_dilated_cusp(rng, grid, m, tol):
    X = random_base(rng, grid)
    r = _radius(rng, m, grid)
    rec, _ = _passing_point(X, m, r, rng)
    if rec is None:
        return None
    rho = float(psi(m, r))
    eps = float(rng.uniform(0.0, 1.0)) * rho or rho
    r2 = float(psi_inv(m, rho / 2))
    D = dilate(X, eps, check_margin=False)
    w1, _, _ = cusp_distances(D, m, r2, np.array([rec.cell]), np.array([rec.xi]))
    slack = float(w1[0, 0]) - 2 * float(psi(m, r2))
    return {"cell": list(rec.cell), "xi": list(rec.xi), "r": r, "eps": eps, "r2": r2,
            "slack": slack}


def ball_in_cone_slack(m: Modulus, r: float, eps: float, xi, n_angle: int = 256,
                    n_radial: int = 24) -> float:
    """Largest ``delta`` with every sample of ``B_{eps + delta}(phi(eps) xi)`` in the
    cone, minus nothing: negative values mean the eps-ball itself sticks out."""
    xi = np.asarray(xi, dtype=float)
    center = float(phi(m, eps)) * xi
    ang = 2 * np.pi * np.arange(n_angle) / n_angle
    unit = np.column_stack([np.cos(ang), np.sin(ang)])
    fr = np.linspace(0.0, 1.0, n_radial + 1)

    def inside(rad):
        pts = center + (fr[:, None, None] * rad * (1 - 1e-12)) * unit[None, :, :]
        return bool(_cone_mask(m, r, xi[None, :], pts.reshape(-1, 2)).all())

    lo, hi = 0.0, 2 * eps
    if not inside(lo + 1e-15):
        return -eps
    if inside(hi):
        return eps
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if inside(mid) else (lo, mid)
    return lo - eps


def _suite_ball_in_cone(rng, grid, m, tol):
    r = float(rng.uniform(0.01, 0.2))
    e_max = float(phi_inv(m, float(psi(m, r)) / 2))
    eps = e_max if rng.random() < 0.3 else float(rng.uniform(0.0, 1.0)) * e_max or e_max
    a = float(rng.uniform(0, 2 * np.pi))
    xi = (math.cos(a), math.sin(a))
    CuspCone(m, r, xi)
    return {"r": r, "eps": eps, "eps_max": e_max, "xi": list(xi),
            "slack": ball_in_cone_slack(m, r, eps, xi)}


def _suite_shifted_exterior(rng, grid, m, tol):
    Z = random_base(rng, grid)
    R = _radius(rng, m, grid)
    rec, _ = _passing_point(Z, m, R, rng)
    if rec is None:
        return None
    rho = float(psi(m, R))
    lim = float(phi_inv(m, rho / 4))
    eta = -float(rng.uniform(0.0, 1.0)) * lim
    eps = float(rng.uniform(0.0, 1.0)) * lim or lim
    Zeta = erode(Z, -eta)
    pts = np.column_stack([c.ravel() for c in grid.centers()])
    y = np.asarray(rec.point)
    sel = (np.linalg.norm(pts - y, axis=1) < 2 * rho) & ~Zeta.mask.ravel()
    shift = (float(phi(m, eps)) + float(phi(m, -eta))) * np.asarray(rec.xi)
    z = pts[sel] + shift
    if len(z) == 0:
        return {"cell": list(rec.cell), "R": R, "eta": eta, "eps": eps, "tested": 0,
                "slack": math.inf}
    d = point_distance(Z, z)
    return {"cell": list(rec.cell), "xi": list(rec.xi), "R": R, "eta": eta, "eps": eps,
            "tested": int(len(z)), "slack": float(d.min() - eps)}


def _suite_co_gap_bound(rng, grid, m, tol):
    X1 = random_base(rng, grid)
    r = float(rng.uniform(3 * grid.h, 0.15))
    while float(psi(m, r)) > grid.side / 6:
        r *= 0.5
    if not cusp_check(X1, m, r, with_pairs=False).passed:
        return None
    limit = float(phi_inv(m, float(psi(m, r)) / 2))
    kind = int(rng.integers(4))
    size = float(rng.uniform(grid.h, max(limit, grid.h)))
    if kind == 0:
        X2 = erode(X1, size)
    elif kind == 1:
        X2 = dilate(X1, size, check_margin=False)
    elif kind == 2:
        a = float(rng.uniform(0, 2 * np.pi))
        k = np.round(np.array([math.cos(a), math.sin(a)]) * size / grid.h).astype(int)
        X2 = RasterSet(grid, np.roll(np.roll(X1.mask, k[0], axis=0), k[1], axis=1))
    else:
        cells = np.argwhere(X1.boundary().mask & X1.mask)
        c = np.asarray(grid.cell_center(*cells[int(rng.integers(len(cells)))]))
        pts = np.stack(grid.centers(), axis=-1)
        X2 = RasterSet(grid, X1.mask | (np.linalg.norm(pts - c, axis=-1) < size))
    if X2.is_empty:
        return None
    e = gap(X2, X1)
    if e > limit:
        return None
    ce = co_gap(X2, X1)
    return {"kind": ["erode", "dilate", "translate", "bump"][kind], "r": r, "gap": e,
            "co_gap": ce, "limit": limit, "slack": float(phi(m, e)) - ce}


def _suite_w1w2(rng, grid, m, tol):
    X = random_blob(rng, grid)
    kind = int(rng.integers(3))
    if kind == 0:
        m = Modulus.lipschitz(float(rng.uniform(0.2, 3)))
    elif kind == 1:
        m = Modulus.hoelder(float(rng.uniform(0.3, 1)), float(rng.uniform(0.3, 2)))
    else:
        m = Modulus.zero()
    r = float(rng.uniform(2 * grid.h, 0.08))
    while float(psi(m, r)) > 0.12 * grid.side:
        r *= 0.5
    b = np.argwhere(X.boundary().mask)
    cell = b[int(rng.integers(len(b)))]
    a = float(rng.uniform(0, 2 * np.pi))
    xi = (math.cos(a), math.sin(a))
    v1, v2 = cusp_verdicts(X, m, r, cell, xi)
    return {"cell": [int(c) for c in cell], "xi": list(xi), "r": r, "modulus": m.to_config(),
            "W1": v1, "W2": v2, "slack": 0.0 if v1 == v2 else -1.0}


def _suite_metric(rng, grid, m, tol):
    """Exact comparisons (symmetry, ordering, identity) must hold exactly; a
    failure sets the slack to ``-inf``.  Otherwise the slack is the worst
    triangle-inequality margin, which the raster tolerance applies to."""
    X, Y, Z = (random_blob(rng, grid) for _ in range(3))
    dxy, dyx = hausdorff_distances(X, Y), hausdorff_distances(Y, X)
    dyz, dxz = hausdorff_distances(Y, Z), hausdorff_distances(X, Z)
    exact = {f"symmetric_{k}": getattr(dxy, k) == getattr(dyx, k)
             for k in ("d_H", "d_upper_H", "d_HP", "d_HS")}
    exact["hp_is_max"] = dxy.d_HP >= max(dxy.d_H, dxy.d_upper_H)
    exact["hs_below_upper"] = dxy.d_HS <= dxy.d_upper_H
    if dxy.d_HP == 0:
        exact["zero_means_equal"] = X == Y
    tri = {f"triangle_{k}": getattr(dxy, k) + getattr(dyz, k) - getattr(dxz, k)
           for k in ("d_H", "d_upper_H", "d_HP")}
    slack = min(tri.values()) if all(exact.values()) else -math.inf
    return {**exact, **{k: float(v) for k, v in tri.items()}, "slack": float(slack)}


_SUITE_FUNCS = {"dilated_cusp": _suite_dilated_cusp, "ball_in_cone": _suite_ball_in_cone,
                "shifted_exterior": _suite_shifted_exterior, "co_gap_bound": _suite_co_gap_bound,
                "w1w2": _suite_w1w2, "metric": _suite_metric}


def audit_geometry(suite: str, count: int = 50, seed: int = 0, *,
                   grid: GridGeometry | None = None, modulus: Modulus | None = None,
                   max_attempts: int | None = None) -> AuditReport:
    """Run ``count`` seeded random instances of one geometric suite.

    Suites:

    * ``dilated_cusp``: the dilation of a cusp-regular set keeps the cusp
      property at the reduced radius ``psi^-1(psi(r) / 2)``.
    * ``ball_in_cone``: the ball of radius ``eps`` around ``phi(eps) xi`` lies in
      the cone for every admissible ``eps``.
    * ``shifted_exterior``: exterior points near a regular boundary point,
      shifted along the cusp direction, stay ``eps`` away from the set.
    * ``co_gap_bound``: under the Lipschitz modulus the co-gap of a perturbed
      set is at most ``phi`` of its gap.
    * ``w1w2``: the two cusp conditions return the same verdict.
    * ``metric``: symmetry, ordering and triangle inequality of the distances.

    Instances whose base fails the cusp check (or whose perturbation is not
    admissible) are redrawn and counted in ``rejected``.  A modulus with
    ``omega(0) > 0`` is rejected outright by the suites that require
    ``omega(0) = 0``.  ``w1w2`` compares verdicts exactly; every other suite
    allows the raster tolerance ``2 h sqrt(2)``.
    """
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    grid = grid or default_audit_grid()
    tol = 0.0 if suite == "w1w2" else RASTER_TOL_FACTOR * grid.h
    if modulus is not None and suite in NEEDS_VANISHING_MODULUS and modulus(0.0) > 0:
        return AuditReport(suite, 0, math.inf, tol, seed, count,
                           ({"rejected": "omega(0) > 0"},))
    rng = np.random.default_rng(seed)
    func = _SUITE_FUNCS[suite]
    details, rejected = [], 0
    max_attempts = max_attempts or 20 * count
    attempts = 0
    while len(details) < count and attempts < max_attempts:
        attempts += 1
        m = modulus or random_modulus(rng, lipschitz_only=suite == "co_gap_bound")
        row = func(rng, grid, m, tol)
        if row is None:
            rejected += 1
            continue
        row.setdefault("modulus", m.to_config())
        details.append(row)
    worst = min((d["slack"] for d in details), default=math.inf)
    return AuditReport(suite, len(details), worst, tol, seed, rejected, tuple(details))


def random_forcing(rng: np.random.Generator):
    """Smooth random right-hand side: a constant plus two random Fourier modes."""
    c0 = float(rng.uniform(0.5, 1.5))
    amp = rng.uniform(-1.0, 1.0, 2)
    kx, ky = rng.integers(1, 4, 2), rng.integers(1, 4, 2)
    ph = rng.uniform(0, 2 * np.pi, 2)

    def f(x, y):
        out = c0 + amp[0] * np.sin(np.pi * (kx[0] * x + ky[0] * y) + ph[0])
        return out + amp[1] * np.cos(np.pi * (kx[1] * x - ky[1] * y) + ph[1])
    return f


def random_pair(rng: np.random.Generator, grid: GridGeometry) -> tuple[RasterSet, RasterSet]:
    """Base domain and a translated, offset, or independently drawn partner."""
    X1 = random_base(rng, grid)
    kind = int(rng.integers(3))
    if kind == 0:
        a = float(rng.uniform(0, 2 * np.pi))
        k = np.round(np.array([math.cos(a), math.sin(a)]) * rng.uniform(0.02, 0.1) / grid.h)
        X2 = RasterSet(grid, np.roll(np.roll(X1.mask, int(k[0]), axis=0), int(k[1]), axis=1))
    elif kind == 1:
        size = float(rng.uniform(0.01, 0.06))
        X2 = erode(X1, size) if rng.random() < 0.5 else dilate(X1, size, check_margin=False)
    else:
        X2 = random_base(rng, grid)
    return X1, X2


COEFFICIENTS = {"identity": CoefficientField.identity(),
                "diag(1,4)": CoefficientField.diagonal(1.0, 4.0)}


def audit_savare_random(count: int = 20, seed: int = 0, *, grid: GridGeometry | None = None,
                        coefficients: dict | None = None) -> AuditReport:
    """Seeded random ``(omega1, omega2, f)`` instances, alternating coefficients."""
    grid = grid or GridGeometry(64, 1.0)
    coefficients = coefficients or COEFFICIENTS
    names = list(coefficients)
    ambs = {name: assemble(grid, coefficients[name]) for name in names}
    rng = np.random.default_rng(seed)
    details, rejected = [], 0
    while len(details) < count and rejected < 20 * count:
        name = names[len(details) % len(names)]
        X1, X2 = random_pair(rng, grid)
        f = random_forcing(rng)
        if X1 == X2 or not interior_nonempty(ambs[name], X1 & X2):
            rejected += 1
            continue
        rows = savare_checks(X1, X2, ambs[name], f)
        counted = [r for r in rows if r["counted"]]
        worst = min(counted, key=lambda r: r["slack"])
        literal = [r for r in rows if not r["counted"]]
        details.append({"instance": len(details), "coefficient": name,
                        "area1": X1.area, "area2": X2.area,
                        "worst_check": f"{worst['check']}/{worst['norm']}",
                        "slack": worst["slack"],
                        "literal_intersection_slack": min(r["slack"] for r in literal)})
    worst = min((d["slack"] for d in details), default=math.inf)
    return AuditReport("savare", len(details), worst, ROUNDOFF, seed, rejected, tuple(details))
