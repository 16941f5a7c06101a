"""Benchmark parametric systems: checkerboard conductivity and a translated hole."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..paramsys import NotPositiveDefiniteError, ParameterBox, ParametricMatrix, save_family
from .assembly import assemble_load, assemble_subdomain_stiffness
from .mesh import Mesh, MeshError, checkerboard_tags, square_with_hole_mesh, structured_square_mesh

STRIP_HEIGHTS = (1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True)
class HoleGeometry:
    """Disc removed from the unit square and the admissible translation range."""

    radius: float = 0.15
    center: tuple = (0.5, 0.5)
    a: float = 0.32

    def __post_init__(self):
        if not 0.0 < self.a < 1.0 / 3.0:
            raise ValueError(f"translation bound a must lie in (0, 1/3), got {self.a}")

    @staticmethod
    def tau(t):
        """Piecewise-linear vertical stretch profile: 0 at the edges, 1 on the middle strip."""
        t = np.asarray(t, dtype=float)
        return np.where(t < 1 / 3, 3 * t, np.where(t <= 2 / 3, 1.0, 3.0 - 3 * t))

    @staticmethod
    def tau_slope(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1 / 3, 3.0, np.where(t <= 2 / 3, 0.0, -3.0))


@dataclass
class FemProblem:
    """A preconditioned affine family ``A(sigma) = R^{-1} K(sigma) R^{-T}``.

    ``loads`` holds the unpreconditioned load vectors and ``rhs`` their
    transforms ``R^{-1} b``; column 0 is the primary load.
    """

    mesh: Mesh
    stiffness_terms: list
    loads: np.ndarray            # (n, q)
    kbar_factor: np.ndarray      # lower-triangular R with Kbar = R R^T
    preconditioned: ParametricMatrix
    rhs: np.ndarray              # (n, q)
    box: ParameterBox
    alpha: float
    beta: float
    kind: str = "custom"
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.preconditioned.n

    @property
    def s(self) -> int:
        return self.preconditioned.s

    @property
    def b(self) -> np.ndarray:
        return self.rhs[:, 0]

    def stiffness(self, sigma) -> np.ndarray:
        return np.tensordot(np.asarray(sigma, dtype=float), np.asarray(self.stiffness_terms), axes=1)

    def recover(self, x) -> np.ndarray:
        """Map preconditioned coordinates back to nodal values ``R^{-T} x``."""
        return scipy.linalg.solve_triangular(self.kbar_factor, x, lower=True, trans="T")

    def export(self, path) -> None:
        """Write the preconditioned family in the MatrixMarket directory layout."""
        meta = {"kind": self.kind, "alpha": self.alpha, "beta": self.beta,
                "box": self.box.to_dict(), **self.info}
        save_family(self.preconditioned, path, b=self.rhs, extra_meta=meta)


def precondition_split(terms, kbar, loads):
    """Congruence transform by the Cholesky factor of ``kbar``.

    Returns ``(P, rhs, R)`` with ``P`` the family ``R^{-1} K_i R^{-T}``,
    ``rhs = R^{-1} loads`` and ``R`` lower triangular.
    """
    kbar = np.asarray(kbar, dtype=float)
    try:
        R = np.linalg.cholesky(kbar)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"preconditioner matrix is not SPD: {exc}") from exc
    out = []
    for K in terms:
        X = scipy.linalg.solve_triangular(R, np.asarray(K, dtype=float), lower=True)
        X = scipy.linalg.solve_triangular(R, X.T, lower=True)
        out.append(0.5 * (X + X.T))
    loads = np.asarray(loads, dtype=float)
    rhs = scipy.linalg.solve_triangular(R, loads, lower=True)
    return ParametricMatrix(out), rhs, R


def gen_checkerboard_problem(N: int, M: int, divisions: int = 32, a: float = 20.0,
                             load=1.0) -> FemProblem:
    """Unit-square Poisson problem with independent conductivity on an N x M grid.

    ``N`` horizontal strips by ``M`` vertical strips give ``s = N*M`` terms,
    numbered row-major from the bottom-left.  Parameters live in ``[1, a]^s``
    and the preconditioner is the all-ones stiffness matrix, so the
    spectrum of ``A(sigma)`` lies in ``[1, a]``.
    """
    if N < 1 or M < 1:
        raise ValueError("need N, M >= 1")
    if divisions % N or divisions % M:
        raise MeshError(f"divisions={divisions} must be divisible by N={N} and M={M}")
    if not a > 1.0:
        raise ValueError("box upper bound a must exceed 1")
    mesh = structured_square_mesh(divisions)
    mesh.tags = checkerboard_tags(mesh, N, M)
    s = N * M
    terms = assemble_subdomain_stiffness(mesh, [{t: 1.0} for t in range(1, s + 1)])
    kbar = np.sum(terms, axis=0)
    loads = assemble_load(mesh, load)[:, None]
    P, rhs, R = precondition_split(terms, kbar, loads)
    return FemProblem(mesh, terms, loads, R, P, rhs, ParameterBox.uniform(1.0, a, s),
                      1.0, float(a), "checkerboard",
                      {"N": N, "M": M, "divisions": divisions, "a": float(a)})


def sigma_of_l(l: float, a: float) -> np.ndarray:
    """Coefficient parameters for a hole translated by ``l``."""
    if not abs(l) < a:
        raise ValueError(f"translation |l| = {abs(l)} must be below a = {a}")
    return np.array([1 + 3 * l, 1 / (1 + 3 * l), 1.0, 1.0, 1 - 3 * l, 1 / (1 - 3 * l)])


def hole_box(a: float) -> ParameterBox:
    """Smallest box containing ``sigma_of_l(l, a)`` for ``|l| <= a``."""
    lo = np.array([1 - 3 * a, 1 / (1 + 3 * a), 1.0, 1.0, 1 - 3 * a, 1 / (1 + 3 * a)])
    hi = np.array([1 + 3 * a, 1 / (1 - 3 * a), 1.0, 1.0, 1 + 3 * a, 1 / (1 - 3 * a)])
    return ParameterBox(lo, hi)


def gen_hole_problem(divisions: int = 36, a: float = 0.32,
                     geometry: HoleGeometry | None = None) -> FemProblem:
    """Poisson problem on the square with a hole, mapped to a fixed reference domain.

    Six terms carry the diagonal coefficient blocks of the bottom, middle
    and top strips.  Column 0 of the loads is ``f = 1`` and column 1 is
    ``f = tau'``; the solution for translation ``l`` is
    ``u0 + l * u1`` with both parts solved at ``sigma_of_l(l, a)``.
    """
    geometry = geometry or HoleGeometry(a=a)
    if geometry.a != a:
        geometry = HoleGeometry(geometry.radius, geometry.center, a)
    if divisions % 3:
        raise MeshError("divisions must be divisible by 3 so strip interfaces follow mesh lines")
    mesh = square_with_hole_mesh(divisions, geometry.center, geometry.radius, STRIP_HEIGHTS)
    ex, ey = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    patterns = [{1: ex}, {1: ey}, {2: ex}, {2: ey}, {3: ex}, {3: ey}]
    terms = assemble_subdomain_stiffness(mesh, patterns)
    kbar = np.sum(terms, axis=0)
    loads = np.column_stack([assemble_load(mesh, 1.0),
                             assemble_load(mesh, {1: 3.0, 2: 0.0, 3: -3.0})])
    P, rhs, R = precondition_split(terms, kbar, loads)
    alpha = 1.0 - 3.0 * a
    return FemProblem(mesh, terms, loads, R, P, rhs, hole_box(a), alpha, 1.0 / alpha, "hole",
                      {"divisions": divisions, "a": float(a), "radius": geometry.radius})
