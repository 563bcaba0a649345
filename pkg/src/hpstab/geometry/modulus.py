"""Moduli of continuity and the derived scales psi, phi."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError

KINDS = ("zero", "lipschitz", "hoelder", "tabulated")


@dataclass(frozen=True)
class Modulus:
    """A nondecreasing function omega on [0, r_max] with omega - omega(0) semi-additive.

    ``table`` holds ``(r, value)`` samples for the tabulated kind; values between
    samples are linearly interpolated.
    """

    kind: str = "lipschitz"
    L: float = 1.0
    alpha: float = 1.0
    offset: float = 0.0
    table: tuple[tuple[float, float], ...] = field(default=())
    r_max: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown modulus kind {self.kind!r}")
        if self.offset < 0:
            raise DomainError("omega(0) must be nonnegative")
        if self.L < 0:
            raise DomainError("modulus slope must be nonnegative")
        if self.kind == "hoelder" and not 0 < self.alpha <= 1:
            raise DomainError("hoelder exponent must lie in (0, 1]")
        if self.kind == "tabulated":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or len(t) < 2:
                raise DomainError("tabulated modulus needs >= 2 (r, value) pairs")
            if t[0, 0] != 0 or np.any(np.diff(t[:, 0]) <= 0):
                raise DomainError("table abscissae must start at 0 and increase")
            if np.any(np.diff(t[:, 1]) < 0) or t[0, 1] != 0:
                raise DomainError("table values must start at 0 and be nondecreasing")
            object.__setattr__(self, "r_max", float(min(self.r_max, t[-1, 0])))

    # constructors
    @classmethod
    def zero(cls, offset: float = 0.0) -> "Modulus":
        return cls(kind="zero", L=0.0, offset=offset)

    @classmethod
    def lipschitz(cls, L: float = 1.0, offset: float = 0.0) -> "Modulus":
        return cls(kind="lipschitz", L=L, offset=offset)

    @classmethod
    def hoelder(cls, alpha: float, L: float = 1.0, offset: float = 0.0) -> "Modulus":
        return cls(kind="hoelder", L=L, alpha=alpha, offset=offset)

    @classmethod
    def tabulated(cls, r, values, offset: float = 0.0) -> "Modulus":
        return cls(kind="tabulated", table=tuple(zip(map(float, r), map(float, values))),
                   offset=offset)

    @classmethod
    def from_config(cls, cfg: dict) -> "Modulus":
        kind = cfg.get("kind", "lipschitz")
        offset = float(cfg.get("offset", 0.0))
        if kind == "zero":
            return cls.zero(offset)
        if kind == "lipschitz":
            return cls.lipschitz(float(cfg.get("L", 1.0)), offset)
        if kind == "hoelder":
            return cls.hoelder(float(cfg["alpha"]), float(cfg.get("L", 1.0)), offset)
        if kind == "tabulated":
            return cls.tabulated(cfg["r"], cfg["values"], offset)
        raise DomainError(f"unknown modulus kind {kind!r}")

    def scaled(self, c: float) -> "Modulus":
        """Return c * omega (offset scaled as well)."""
        if self.kind == "tabulated":
            t = np.asarray(self.table)
            return Modulus.tabulated(t[:, 0], c * t[:, 1], offset=c * self.offset)
        return Modulus(kind=self.kind, L=c * self.L, alpha=self.alpha,
                       offset=c * self.offset, r_max=self.r_max)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "offset": self.offset}
        if self.kind in ("lipschitz", "hoelder"):
            cfg["L"] = self.L
        if self.kind == "hoelder":
            cfg["alpha"] = self.alpha
        if self.kind == "tabulated":
            t = np.asarray(self.table)
            cfg["r"], cfg["values"] = t[:, 0].tolist(), t[:, 1].tolist()
        return cfg

    @property
    def vanishes_at_zero(self) -> bool:
        return self.offset == 0.0

    def _raw(self, r):
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "lipschitz":
            return self.L * r
        if self.kind == "hoelder":
            return self.L * np.power(r, self.alpha)
        t = np.asarray(self.table)
        return np.interp(r, t[:, 0], t[:, 1])

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.r_max) or np.any(np.isnan(arr)):
            raise DomainError(f"radius outside [0, {self.r_max}]")
        out = self.offset + self._raw(arr)
        return float(out) if out.ndim == 0 else out


def modulus_eval(m: Modulus, r):
    return m(r)


def psi(m: Modulus, r):
    w = m(r)
    return np.sqrt(np.square(r) + np.square(w))


def phi(m: Modulus, r):
    return np.asarray(r, dtype=float) + m(r) if np.ndim(r) else float(r) + m(r)


def phi_psi(m: Modulus, r: float) -> tuple[float, float]:
    """Return ``(psi(r), phi(r))``."""
    return float(psi(m, r)), float(phi(m, r))


def _invert(f, m: Modulus, s: float, name: str) -> float:
    lo = 0.0
    f0 = f(m, 0.0)
    if s < f0:
        raise DomainError(f"{name} target {s} below {name}(0) = {f0}")
    hi = min(max(s, 1.0), m.r_max)
    while f(m, hi) < s:
        if hi >= m.r_max:
            raise DomainError(f"{name} target {s} above range")
        hi = min(2 * hi, m.r_max)
    tol = 1e-12 * (hi if math.isinf(m.r_max) else m.r_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(m, mid) < s:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phi_inv(m: Modulus, s: float) -> float:
    return _invert(lambda mm, r: float(phi(mm, r)), m, s, "phi")


def psi_inv(m: Modulus, s: float) -> float:
    return _invert(lambda mm, r: float(psi(mm, r)), m, s, "psi")
