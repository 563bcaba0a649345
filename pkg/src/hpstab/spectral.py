"""Dirichlet eigenpairs, energy projections onto domain spaces and generalized
angles between finite-dimensional subspaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import EmptyDomain, NumericsError, RankError
from .fem import AmbientSystem, DirichletSystem, field_grid, restrict
from .geometry.raster import RasterSet

DENSE_LIMIT = 1500
CLUSTER_TOL = 1e-6


def cluster_labels(values: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    """Consecutive ascending eigenvalues within ``tol`` (relative) share a label."""
    labels = np.zeros(len(values), dtype=int)
    for i in range(1, len(values)):
        same = abs(values[i] - values[i - 1]) <= tol * abs(values[i])
        labels[i] = labels[i - 1] if same else labels[i - 1] + 1
    return labels


@dataclass(frozen=True, eq=False)
class EigenResult:
    system: DirichletSystem
    values: np.ndarray
    vectors: np.ndarray       # local dofs x k, M-orthonormal columns
    residuals: np.ndarray
    clusters: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def ambient_vectors(self) -> np.ndarray:
        return self.system.extend(self.vectors)

    def ambient(self, i: int) -> np.ndarray:
        return self.system.extend(self.vectors[:, i])

    def cluster_of(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.clusters == self.clusters[i])]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n,lambda,residual,cluster\n")
            for i, (lam, res, c) in enumerate(zip(self.values, self.residuals, self.clusters)):
                fh.write(f"{i + 1},{lam:.17g},{res:.17g},{c}\n")

    def vector_csv(self, i: int, path) -> None:
        np.savetxt(path, field_grid(self.system.ambient, self.ambient(i)),
                   delimiter=",", fmt="%.17g")


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def eigens(sys: DirichletSystem, k: int, *, dense_limit: int = DENSE_LIMIT,
           cluster_tol: float = CLUSTER_TOL, seed: int = 0,
           maxiter: int | None = None) -> EigenResult:
    """The ``k`` smallest eigenpairs of ``K v = lambda M v``."""
    N = sys.ndof
    if not 1 <= k <= N:
        raise ValueError(f"k={k} must lie in [1, {N}]")
    K, M = sys.K, sys.M
    if N <= dense_limit:
        vals, V = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, k - 1])
    else:
        v0 = np.random.default_rng(seed).standard_normal(N)
        try:
            vals, V = spla.eigsh(K.tocsc(), k=k, M=M.tocsc(), sigma=0.0, which="LM",
                                 v0=v0, maxiter=maxiter, tol=1e-13)
        except spla.ArpackNoConvergence as exc:
            raise NumericsError(f"shift-invert iteration did not converge: {exc}") from exc
        # Rayleigh-Ritz on the returned span restores exact M-orthonormality
        Kr = V.T @ (K @ V)
        Mr = V.T @ (M @ V)
        vals, C = sla.eigh(0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T))
        V = V @ C
    order = np.argsort(vals)
    vals, V = vals[order], _fix_signs(V[:, order])
    R = K @ V - (M @ V) * vals
    res = np.linalg.norm(R, axis=0) / np.maximum(np.abs(vals) * np.linalg.norm(M @ V, axis=0),
                                                 1e-300)
    if not np.all(np.isfinite(vals)) or np.any(res > 1e-8):
        raise NumericsError(f"eigenpair residual {res.max():.3e} above 1e-8")
    return EigenResult(sys, vals, V, res, cluster_labels(vals, cluster_tol))


def eigenvalues(sys: DirichletSystem, k: int, **kw) -> np.ndarray:
    return eigens(sys, k, **kw).values


def _system(amb: AmbientSystem, omega) -> DirichletSystem:
    if isinstance(omega, DirichletSystem):
        return omega
    return restrict(amb, omega)


def project_energy(amb: AmbientSystem, u: np.ndarray, omega: RasterSet | DirichletSystem,
                   norm: str = "V") -> np.ndarray:
    """Orthogonal projection of ambient field(s) ``u`` onto the space of ``omega``
    in the chosen energy inner product; returned in ambient coordinates."""
    sys = _system(amb, omega)
    A = amb.form(norm)
    rhs = (A @ u)[sys.index]
    rhs = np.asarray(rhs, dtype=float)
    if norm == "V":
        w = sys.solve(rhs)
    else:
        w = spla.splu(A[sys.index][:, sys.index].tocsc()).solve(rhs)
    return sys.extend(w)


def energy_norm(amb: AmbientSystem, u: np.ndarray, norm: str = "V") -> float:
    return math.sqrt(max(float(u @ (amb.form(norm) @ u)), 0.0))


def subspace_distance(amb: AmbientSystem, u: np.ndarray, omega, norm: str = "V") -> float:
    """``d_V(u, V_omega) = ||u - P u||``."""
    return energy_norm(amb, u - project_energy(amb, u, omega, norm), norm)


@dataclass(frozen=True, eq=False)
class SubspaceHandle:
    """Span of ambient-coordinate columns, tied to the ambient system that
    defines its inner product."""

    vectors: np.ndarray
    ambient: AmbientSystem
    system: DirichletSystem | None = None

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        object.__setattr__(self, "vectors", V)
        if V.shape[1] == 0:
            raise RankError("subspace handle has no generating vectors")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def gram(self, norm: str = "V") -> np.ndarray:
        V = self.vectors
        return V.T @ (self.ambient.form(norm) @ V)

    def gram_condition(self, norm: str = "V") -> float:
        ev = np.linalg.eigvalsh(self.gram(norm))
        return math.inf if ev[0] <= 0 else float(ev[-1] / ev[0])

    def orthonormal(self, norm: str = "V", max_cond: float = 1e12) -> np.ndarray:
        """Basis of the span that is orthonormal in the chosen inner product."""
        G = self.gram(norm)
        G = 0.5 * (G + G.T)
        ev = np.linalg.eigvalsh(G)
        if ev[0] <= ev[-1] / max_cond or ev[-1] <= 0:
            raise RankError(f"generators are rank deficient (Gram condition "
                            f"{math.inf if ev[0] <= 0 else ev[-1] / ev[0]:.3e})")
        L = np.linalg.cholesky(G)
        return sla.solve_triangular(L, self.vectors.T, lower=True).T

    @classmethod
    def from_eigen(cls, res: EigenResult, indices) -> "SubspaceHandle":
        idx = list(indices)
        return cls(res.ambient_vectors()[:, idx], res.system.ambient, res.system)


def _one_sided(sv: np.ndarray, dim: int) -> float:
    """sup over unit vectors of one span of the distance to the other span."""
    if len(sv) < dim:
        return 1.0
    smin = float(np.min(sv)) if len(sv) else 0.0
    return math.sqrt(max(0.0, 1.0 - min(smin, 1.0) ** 2))


def generalized_angle(a: SubspaceHandle, b: SubspaceHandle, norm: str = "V") -> float:
    """Largest energy distance from a unit vector of either span to the other span."""
    if a.ambient is not b.ambient:
        raise ValueError("subspaces belong to different ambient systems")
    Qa = a.orthonormal(norm)
    Qb = b.orthonormal(norm)
    C = Qa.T @ (a.ambient.form(norm) @ Qb)
    sv = np.linalg.svd(C, compute_uv=False)
    return min(1.0, max(_one_sided(sv, a.dim), _one_sided(sv, b.dim)))


def riesz_indices(values: np.ndarray, center: float, radius: float) -> list[int]:
    """Indices whose inverse eigenvalues lie in the open disk ``|1/lambda - center| < radius``
    (the discrete counterpart of a resolvent contour projection of the solution operator)."""
    nu = 1.0 / np.asarray(values, dtype=float)
    return [int(i) for i in np.flatnonzero(np.abs(nu - center) < radius)]


def riesz_subspace(res: EigenResult, center: float, radius: float) -> SubspaceHandle:
    idx = riesz_indices(res.values, center, radius)
    if not idx:
        raise EmptyDomain("no eigenvalue inside the contour")
    return SubspaceHandle.from_eigen(res, idx)
