"""Q1 finite elements for the divergence-form operator on the ambient box.

The mesh is the raster grid itself: every cell is a bilinear element, nodes on
the box frame carry homogeneous Dirichlet data, and the space of a raster domain
is spanned by the nodes whose four adjacent cells all belong to the domain.
Restriction is therefore a principal-submatrix extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CoefficientError, EmptyDomain, NumericsError, StateError
from .geometry.raster import GridGeometry, RasterSet

_G = 0.5 / math.sqrt(3.0)
GAUSS_PTS = np.array([[0.5 - _G, 0.5 - _G], [0.5 + _G, 0.5 - _G],
                      [0.5 - _G, 0.5 + _G], [0.5 + _G, 0.5 + _G]])
# local node order: (i, j), (i+1, j), (i, j+1), (i+1, j+1)
_LOCAL = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])


def _shape(xi, eta):
    return np.array([(1 - xi) * (1 - eta), xi * (1 - eta), (1 - xi) * eta, xi * eta])


def _shape_grad(xi, eta):
    return np.array([[-(1 - eta), 1 - eta, -eta, eta],
                     [-(1 - xi), -xi, 1 - xi, xi]])


_N_Q = np.array([_shape(*q) for q in GAUSS_PTS])        # (4 qp, 4 nodes)
_DN_Q = np.array([_shape_grad(*q) for q in GAUSS_PTS])  # (4 qp, 2, 4 nodes)


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric 2x2 matrix field ``A(x)`` with declared ellipticity ``alpha``
    and declared Lipschitz seminorm bound ``lipschitz``.

    ``func(x, y)`` takes equally shaped arrays and returns ``(..., 2, 2)``.
    """

    func: Callable
    alpha: float
    lipschitz: float = 0.0
    constant: bool = False
    label: str = "custom"

    @classmethod
    def from_matrix(cls, A, alpha: float | None = None, label: str | None = None):
        A = np.asarray(A, dtype=float)
        if A.shape != (2, 2):
            raise CoefficientError("coefficient matrix must be 2x2")
        if alpha is None:
            alpha = float(np.linalg.eigvalsh(0.5 * (A + A.T)).min())

        def f(x, y, A=A):
            return np.broadcast_to(A, np.shape(x) + (2, 2))

        return cls(f, alpha, 0.0, True, label or f"constant{A.tolist()}")

    @classmethod
    def identity(cls):
        return cls.from_matrix(np.eye(2), 1.0, "identity")

    @classmethod
    def diagonal(cls, a11: float, a22: float):
        return cls.from_matrix(np.diag([a11, a22]), min(a11, a22), f"diag({a11},{a22})")

    @classmethod
    def from_config(cls, cfg: dict) -> "CoefficientField":
        kind = cfg.get("kind", "identity")
        if kind == "identity":
            return cls.identity()
        if kind == "diagonal":
            return cls.diagonal(float(cfg["a11"]), float(cfg["a22"]))
        if kind == "constant":
            return cls.from_matrix(cfg["matrix"], cfg.get("alpha"))
        raise CoefficientError(f"unknown coefficient kind {kind!r}")

    def scaled(self, c: float) -> "CoefficientField":
        f = self.func
        return CoefficientField(lambda x, y: c * np.asarray(f(x, y)), c * self.alpha,
                                c * self.lipschitz, self.constant, f"{c}*{self.label}")

    def __call__(self, x, y) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, float), np.asarray(y, float)), dtype=float)

    def validate(self, grid: GridGeometry, rtol: float = 1e-12) -> tuple[float, float]:
        """Check symmetry, ellipticity and the Lipschitz bound on ``grid``.

        Returns the measured ``(min, max)`` eigenvalues over quadrature points.
        """
        X, Y = gauss_points(grid)
        A = self(X, Y)
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - np.swapaxes(A, -1, -2)).max() > rtol * scale:
            raise CoefficientError("coefficient matrix is not symmetric")
        ev = np.linalg.eigvalsh(A)
        lo, hi = float(ev.min()), float(ev.max())
        if lo < self.alpha * (1 - 1e-12) - rtol * scale or self.alpha <= 0:
            raise CoefficientError(f"ellipticity violated: min eigenvalue {lo} < alpha {self.alpha}")
        if not self.constant:
            Xc, Yc = grid.centers()
            Ac = self(Xc, Yc)
            est = 0.0
            for ax in (0, 1):
                d = np.diff(Ac, axis=ax)
                est = max(est, float(np.linalg.norm(d, ord=2, axis=(-2, -1)).max()) / grid.h)
            if est > self.lipschitz * (1 + 1e-9) + 1e-12:
                raise CoefficientError(
                    f"Lipschitz estimate {est:.6g} exceeds declared bound {self.lipschitz}")
        return lo, hi


def gauss_points(grid: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Physical 2x2 Gauss points, shape ``(n, n, 4)``."""
    h = grid.h
    base = np.arange(grid.n) * h
    X = grid.x0 + base[:, None, None] + h * GAUSS_PTS[None, None, :, 0]
    Y = grid.y0 + base[None, :, None] + h * GAUSS_PTS[None, None, :, 1]
    return np.broadcast_to(X, (grid.n, grid.n, 4)), np.broadcast_to(Y, (grid.n, grid.n, 4))


def _element_matrices(grid: GridGeometry, coeff: CoefficientField, quadrature: str):
    n, h = grid.n, grid.h
    if quadrature == "gauss" and not coeff.constant:
        X, Y = gauss_points(grid)
        A = coeff(X, Y).reshape(n * n, 4, 2, 2)
    elif quadrature in ("gauss", "midpoint"):
        Xc, Yc = grid.centers()
        Ac = coeff(Xc, Yc).reshape(n * n, 1, 2, 2)
        A = np.broadcast_to(Ac, (n * n, 4, 2, 2))
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    # reference gradients scale by 1/h, the Jacobian by h^2: they cancel in 2-D
    Ke = 0.25 * np.einsum("qai,cqab,qbj->cij", _DN_Q, A, _DN_Q)
    Me = 0.25 * h * h * np.einsum("qi,qj->ij", _N_Q, _N_Q)
    return Ke, Me


def _cell_nodes(n: int) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    return np.stack([(ii + di) * (n + 1) + (jj + dj) for di, dj in _LOCAL], axis=1)


def _scatter(conn: np.ndarray, Ke: np.ndarray, size: int) -> sp.csr_matrix:
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    vals = np.broadcast_to(Ke, (len(conn), 4, 4)).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


@dataclass(eq=False)
class AmbientSystem:
    """Stiffness/mass pair of the whole box with zero data on the box frame.

    Degrees of freedom are the nodes ``1 <= i, j <= n-1`` in row-major order.
    ``K`` is the form of the operator, ``K0`` the Laplacian (plain gradient form)
    used for the unweighted H^1_0 norm; ``M`` the consistent mass.
    """

    grid: GridGeometry
    coeff: CoefficientField
    K: sp.csr_matrix
    M: sp.csr_matrix
    M_full: sp.csr_matrix
    quadrature: str = "gauss"
    eig_bounds: tuple[float, float] = (1.0, 1.0)
    _K0: sp.csr_matrix | None = field(default=None, repr=False)
    _p: float | None = field(default=None, repr=False)
    _solve: dict | None = field(default=None, repr=False)

    @property
    def ndof(self) -> int:
        return (self.grid.n - 1) ** 2

    @property
    def dof_nodes(self) -> np.ndarray:
        """Global node index of each ambient dof."""
        n = self.grid.n
        i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
        return (i * (n + 1) + j).ravel()

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        n, h = self.grid.n, self.grid.h
        i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
        return self.grid.x0 + i.ravel() * h, self.grid.y0 + j.ravel() * h

    @property
    def K0(self) -> sp.csr_matrix:
        if self._K0 is None:
            if self.coeff.label == "identity":
                self._K0 = self.K
            else:
                self._K0 = assemble(self.grid, CoefficientField.identity(),
                                    compute_p=False).K
        return self._K0

    def form(self, norm: str = "V") -> sp.csr_matrix:
        """``"V"``: operator energy form; ``"H1"``: plain gradient form."""
        if norm == "V":
            return self.K
        if norm == "H1":
            return self.K0
        raise ValueError(f"unknown norm {norm!r}")

    @property
    def p(self) -> float:
        if self._p is None:
            raise StateError("Friedrichs constant not computed; call friedrichs_constant first")
        return self._p

    def solve_ambient(self, b: np.ndarray, norm: str = "V") -> np.ndarray:
        """Apply the inverse of the ambient form (``"V"`` or ``"H1"``), factorized once."""
        if self._solve is None:
            self._solve = {}
        if norm not in self._solve:
            A = self.form(norm)
            if A is self.K and "V" in self._solve:
                self._solve[norm] = self._solve["V"]
            else:
                self._solve[norm] = spla.factorized(A.tocsc())
        return self._solve[norm](np.asarray(b, dtype=float))

    def load(self, f) -> np.ndarray:
        """Ambient load vector ``(f, phi_i)`` for f given on ambient dofs or as a
        callable evaluated at all box nodes."""
        if callable(f):
            n, h = self.grid.n, self.grid.h
            c = self.grid.x0 + np.arange(n + 1) * h
            X, Y = np.meshgrid(c, self.grid.y0 + np.arange(n + 1) * h, indexing="ij")
            vals = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape).ravel()
            return (self.M_full @ vals)[self.dof_nodes]
        f = np.asarray(f, dtype=float)
        if f.shape != (self.ndof,):
            raise ValueError(f"ambient field must have length {self.ndof}")
        return self.M @ f

    def interpolate(self, f) -> np.ndarray:
        x, y = self.node_coords()
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).copy()


def assemble(grid: GridGeometry, coeff: CoefficientField, *, quadrature: str = "gauss",
             compute_p: bool = True) -> AmbientSystem:
    """Assemble the Q1 stiffness and mass matrices of the box."""
    bounds = coeff.validate(grid)
    n = grid.n
    Ke, Me = _element_matrices(grid, coeff, quadrature)
    conn = _cell_nodes(n)
    size = (n + 1) ** 2
    K_full = _scatter(conn, Ke, size)
    M_full = _scatter(conn, Me, size)
    i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
    dofs = (i * (n + 1) + j).ravel()
    K = K_full[dofs][:, dofs].tocsr()
    M = M_full[dofs][:, dofs].tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    amb = AmbientSystem(grid, coeff, K.tocsr(), M.tocsr(), M_full, quadrature, bounds)
    if compute_p:
        friedrichs_constant(amb)
    return amb


def _smallest_eig(K, M) -> float:
    if K.shape[0] <= 400:
        return float(sla.eigh(K.toarray(), M.toarray(), eigvals_only=True,
                              subset_by_index=[0, 0])[0])
    v0 = np.ones(K.shape[0])
    vals = spla.eigsh(K.tocsc(), k=1, M=M.tocsc(), sigma=0.0, which="LM", v0=v0,
                      return_eigenvectors=False)
    return float(vals[0])


def friedrichs_constant(amb: AmbientSystem | GridGeometry,
                        coeff: CoefficientField | None = None) -> float:
    """Smallest p with ``||u||^2_{L2} <= p ||u||^2_V`` on the box: ``1 / lambda_min``.

    Accepts an assembled ambient system (the value is cached on it) or a grid
    together with a coefficient field.
    """
    if isinstance(amb, GridGeometry):
        amb = assemble(amb, coeff or CoefficientField.identity(), compute_p=False)
    if amb._p is None:
        amb._p = 1.0 / _smallest_eig(amb.K, amb.M)
    return amb._p


@dataclass(eq=False)
class DirichletSystem:
    domain: RasterSet
    ambient: AmbientSystem
    index: np.ndarray          # ambient dof of each local dof
    K: sp.csr_matrix
    M: sp.csr_matrix
    _solve: Callable | None = field(default=None, repr=False)

    @property
    def ndof(self) -> int:
        return len(self.index)

    def extend(self, u: np.ndarray) -> np.ndarray:
        """Zero extension to the ambient dofs."""
        out = np.zeros(self.ambient.ndof) if np.ndim(u) == 1 else \
            np.zeros((self.ambient.ndof,) + np.shape(u)[1:])
        out[self.index] = u
        return out

    def restrict_vector(self, u_amb: np.ndarray) -> np.ndarray:
        return np.asarray(u_amb)[self.index]

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._solve is None:
            self._solve = spla.factorized(self.K.tocsc())
        return self._solve(np.asarray(b, dtype=float))

    def node_mask(self) -> np.ndarray:
        n = self.ambient.grid.n
        out = np.zeros((n - 1) * (n - 1), dtype=bool)
        out[self.index] = True
        return out.reshape(n - 1, n - 1)


def interior_dofs(amb: AmbientSystem, omega: RasterSet) -> np.ndarray:
    """Ambient dofs whose four adjacent cells all lie in ``omega``."""
    m = omega.mask
    inside = m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]
    return np.flatnonzero(inside.ravel())


def restrict(amb: AmbientSystem, omega: RasterSet) -> DirichletSystem:
    if omega.grid != amb.grid:
        raise ValueError("domain and ambient system use different grids")
    idx = interior_dofs(amb, omega)
    if len(idx) == 0:
        raise EmptyDomain("domain has no interior nodes")
    K = amb.K[idx][:, idx].tocsr()
    M = amb.M[idx][:, idx].tocsr()
    return DirichletSystem(omega, amb, idx, K, M)


@dataclass(frozen=True, eq=False)
class FieldVector:
    """Nodal coefficients on a Dirichlet system; ``ambient`` is the zero extension."""

    system: DirichletSystem
    values: np.ndarray

    @property
    def ambient(self) -> np.ndarray:
        return self.system.extend(self.values)


def solve_dirichlet(sys: DirichletSystem, f, *, verify: bool = True) -> FieldVector:
    """Weak solution of ``A u = f`` in the Dirichlet space of ``sys.domain``.

    With ``verify`` the relative residual (<= 1e-10) and the a-priori bound
    ``||u||_{H1} <= ||f||_{H^-1} / alpha`` in the plain gradient norm are checked.
    """
    amb = sys.ambient
    b_amb = amb.load(f)
    b = b_amb[sys.index]
    if not np.any(b):
        return FieldVector(sys, np.zeros(sys.ndof))
    u = sys.solve(b)
    if not np.all(np.isfinite(u)):
        raise NumericsError("sparse solve produced non-finite values")
    if verify:
        res = np.linalg.norm(sys.K @ u - b)
        if res > 1e-10 * np.linalg.norm(b):
            raise NumericsError(f"relative residual {res / np.linalg.norm(b):.3e} above 1e-10")
        u_amb = sys.extend(u)
        grad = math.sqrt(max(float(u_amb @ (amb.K0 @ u_amb)), 0.0))
        dual = math.sqrt(max(float(b_amb @ amb.solve_ambient(b_amb, "H1")), 0.0))
        if grad > dual / amb.coeff.alpha * (1 + 1e-9):
            raise NumericsError("a-priori stability bound violated")
    return FieldVector(sys, u)


@dataclass(frozen=True)
class Norms:
    V: float
    L: float
    L2: float
    H1: float


def norms(amb: AmbientSystem, u: np.ndarray) -> Norms:
    """Norms of an ambient field: operator energy ``V``, Friedrichs-weighted ``L``,
    plain ``L2`` and plain gradient ``H1``."""
    p = amb.p
    u = np.asarray(u, dtype=float)
    m = float(u @ (amb.M @ u))
    return Norms(math.sqrt(max(float(u @ (amb.K @ u)), 0.0)), math.sqrt(max(p * m, 0.0)),
                 math.sqrt(max(m, 0.0)), math.sqrt(max(float(u @ (amb.K0 @ u)), 0.0)))


@dataclass(frozen=True)
class DualNorms:
    V_dual: float
    L_dual: float


def dual_norms(amb: AmbientSystem, f) -> DualNorms:
    """``||f||_{V'}`` via one ambient solve; ``||f||_{L'} = p^{-1/2} ||f||_{L2}``."""
    p = amb.p
    b = amb.load(f)
    vd = math.sqrt(max(float(b @ amb.solve_ambient(b)), 0.0))
    if callable(f):
        n, h = amb.grid.n, amb.grid.h
        X, Y = np.meshgrid(amb.grid.x0 + np.arange(n + 1) * h,
                           amb.grid.y0 + np.arange(n + 1) * h, indexing="ij")
        fv = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape).ravel()
        l2 = float(fv @ (amb.M_full @ fv))
    else:
        fv = np.asarray(f, dtype=float)
        l2 = float(fv @ (amb.M @ fv))
    return DualNorms(vd, math.sqrt(max(l2, 0.0) / p))


def functional_dual_norm(amb: AmbientSystem, b_amb: np.ndarray) -> float:
    """``||F||_{V'}`` of a functional given by its ambient load vector."""
    return math.sqrt(max(float(b_amb @ amb.solve_ambient(b_amb)), 0.0))


def export_coo(A: sp.spmatrix, path) -> None:
    """Write ``row col value`` lines (0-based) with 17 significant digits."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def field_grid(amb: AmbientSystem, u_amb: np.ndarray) -> np.ndarray:
    """Ambient field as an ``(n+1) x (n+1)`` nodal array including the zero frame."""
    n = amb.grid.n
    out = np.zeros((n + 1, n + 1))
    out[1:n, 1:n] = np.asarray(u_amb).reshape(n - 1, n - 1)
    return out


def export_field_csv(amb: AmbientSystem, u_amb: np.ndarray, path) -> None:
    np.savetxt(path, field_grid(amb, u_amb), delimiter=",", fmt="%.17g")
