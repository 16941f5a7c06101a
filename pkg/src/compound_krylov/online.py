"""Offline-to-online compression and batched reduced Galerkin solves."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .krylov import direct_solve
from .offline import ReducedBasis
from .paramsys import DimensionError, ParametricMatrix, a_norm


@dataclass(frozen=True)
class ReducedSystem:
    """Compressed terms ``Q^T A_i Q`` and right-hand side(s) ``Q^T b``."""

    reduced_terms: np.ndarray
    reduced_rhs: np.ndarray
    basis: ReducedBasis

    @property
    def m(self) -> int:
        return self.reduced_terms.shape[1]

    @property
    def s(self) -> int:
        return self.reduced_terms.shape[0]

    def matrix(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.s,):
            raise DimensionError(f"parameter vector must have length {self.s}")
        return np.tensordot(sigma, self.reduced_terms, axes=1)


@dataclass
class OnlineSolution:
    """Result of one reduced solve; ``x`` and ``z`` are ``None`` on failure."""

    sigma: np.ndarray
    x: np.ndarray | None
    z: np.ndarray | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _basis_matrix(Q) -> tuple[np.ndarray, ReducedBasis]:
    if isinstance(Q, ReducedBasis):
        return Q.Q, Q
    Q = np.asarray(Q, dtype=float)
    return Q, ReducedBasis(Q, "external", 0)


def compress(P: ParametricMatrix, b, Q) -> ReducedSystem:
    """Precompute ``Q^T A_i Q`` (symmetrized) and ``Q^T b``.

    ``b`` may hold several right-hand sides as columns.
    """
    Qm, basis = _basis_matrix(Q)
    if Qm.shape[0] != P.n:
        raise DimensionError(f"basis has {Qm.shape[0]} rows, family has n = {P.n}")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != P.n:
        raise DimensionError(f"b has length {b.shape[0]}, family has n = {P.n}")
    terms = np.empty((P.s, Qm.shape[1], Qm.shape[1]))
    for i, a in enumerate(P.terms):
        t = Qm.T @ (a @ Qm)
        terms[i] = 0.5 * (t + t.T)
    terms.flags.writeable = False
    rhs = Qm.T @ b
    return ReducedSystem(terms, rhs, basis)


def _solve_one(RS: ReducedSystem, sigma) -> OnlineSolution:
    sigma = np.asarray(sigma, dtype=float)
    try:
        A_hat = RS.matrix(sigma)
        factor = scipy.linalg.cho_factor(A_hat, lower=True, check_finite=False)
        z = scipy.linalg.cho_solve(factor, RS.reduced_rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        return OnlineSolution(sigma, None, None, f"reduced matrix not SPD: {exc}")
    return OnlineSolution(sigma, RS.basis.Q @ z, z)


def solve_online(RS: ReducedSystem, sigmas, workers: int = 1) -> list[OnlineSolution]:
    """Galerkin solutions ``x = Q z`` with ``(sum_i sigma_i A_hat_i) z = b_hat``.

    A reduced matrix that fails Cholesky is reported on its own entry; the
    remaining solves continue.  Output order matches input order.
    """
    sigmas = [np.asarray(s, dtype=float) for s in sigmas]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda s: _solve_one(RS, s), sigmas))
    return [_solve_one(RS, s) for s in sigmas]


def galerkin_error(P: ParametricMatrix, b, sigma, xhat, x_exact=None) -> float:
    """``||x(sigma) - xhat||_{A(sigma)}`` against a direct solve.

    Pass ``x_exact`` to reuse a known solution.
    """
    if x_exact is None:
        x_exact = direct_solve(P, sigma, b)
    return a_norm(P, sigma, np.asarray(x_exact) - np.asarray(xhat))
