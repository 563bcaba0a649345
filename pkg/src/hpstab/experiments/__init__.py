"""Perturbation families, stability sweeps and inequality audits."""

from .audits import (
    SUITES,
    audit_birkhoff,
    audit_geometry,
    audit_savare,
    audit_savare_random,
    birkhoff_quantities,
    ball_in_cone_slack,
    savare_checks,
)
from .families import (
    ERODE_SCHEDULE,
    PerturbationFamily,
    bump_profile,
    check_exact_offsets,
    unit_square,
    unit_square_grid,
)
from .fitting import SlopeFit, fit_slope
from .records import AuditReport, SweepRecord, SweepResult
from .sweeps import AnalyticSquare, angle_sweep, eigen_stability_sweep, resolvent_sweep

__all__ = [
    "SUITES", "audit_birkhoff", "audit_geometry", "audit_savare", "audit_savare_random",
    "birkhoff_quantities", "ball_in_cone_slack", "savare_checks", "ERODE_SCHEDULE",
    "PerturbationFamily", "bump_profile", "check_exact_offsets", "unit_square",
    "unit_square_grid", "SlopeFit", "fit_slope", "AuditReport", "SweepRecord", "SweepResult",
    "AnalyticSquare", "angle_sweep", "eigen_stability_sweep", "resolvent_sweep",
]
