"""Reference solvers: dense SPD direct solve, CG, and Chebyshev machinery.

These serve as oracles for the compound Krylov solvers and as the source
of the error bounds used to pick cut-off tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly

from .paramsys import NotPositiveDefiniteError, ParametricMatrix, a_norm, apply, evaluate

MAX_GAMMA_ORDER = 30


def cholesky_solve(A: np.ndarray, b) -> np.ndarray:
    """Solve ``A x = b`` for dense SPD ``A`` via Cholesky."""
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def direct_solve(P: ParametricMatrix, sigma, b) -> np.ndarray:
    """Exact solution ``x(sigma)`` of ``A(sigma) x = b``."""
    b = P.check_vector(b)
    return cholesky_solve(evaluate(P, sigma), b)


def spectral_bounds(P: ParametricMatrix, sigma) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda_min, lambda_max)`` of ``A(sigma)``."""
    lam = scipy.linalg.eigvalsh(evaluate(P, sigma))
    return float(lam[0]), float(lam[-1])


@dataclass
class CgIterate:
    j: int
    x: np.ndarray
    error: float | None = None


@dataclass
class CgTrace:
    """CG iterates ``x_1 .. x_jmax`` (iterate ``j`` lies in ``K_j(A, b)``).

    ``breakdown`` is set if a direction of nonpositive curvature stopped the
    iteration; remaining iterates then repeat the last valid one.
    """

    iterates: list[CgIterate] = field(default_factory=list)
    kappa_estimate: float | None = None
    breakdown: bool = False
    converged_at: int | None = None

    def errors(self) -> np.ndarray:
        return np.array([it.error for it in self.iterates], dtype=float)

    def solution(self, j: int) -> np.ndarray:
        return self.iterates[j - 1].x


def cg_solve(P: ParametricMatrix, sigma, b, j_max: int, x_exact=None,
             compute_kappa: bool = True) -> CgTrace:
    """Run ``j_max`` steps of unpreconditioned CG from ``x_0 = 0``.

    Parameters
    ----------
    P, sigma : the system ``A(sigma)``
    b : right-hand side
    j_max : number of iterations to record
    x_exact : optional exact solution; if given, A-norm errors are stored
    compute_kappa : compute ``kappa(A(sigma))`` by a dense eigensolve
    """
    b = P.check_vector(b)
    sigma = P.check_sigma(sigma)
    trace = CgTrace()
    if compute_kappa:
        lo, hi = spectral_bounds(P, sigma)
        trace.kappa_estimate = hi / lo if lo > 0 else np.inf

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    tiny = np.finfo(float).tiny
    done = rr == 0.0
    for j in range(1, j_max + 1):
        if not done:
            Ap = apply(P, sigma, p)
            curv = float(p @ Ap)
            if curv <= tiny:
                trace.breakdown = True
                done = True
            else:
                alpha = rr / curv
                x = x + alpha * p
                r = r - alpha * Ap
                rr_new = float(r @ r)
                if rr_new == 0.0:
                    trace.converged_at = j
                    done = True
                else:
                    p = r + (rr_new / rr) * p
                rr = rr_new
        err = None
        if x_exact is not None:
            err = a_norm(P, sigma, np.asarray(x_exact) - x)
        trace.iterates.append(CgIterate(j, x.copy(), err))
    return trace


def cheb_bound(kappa: float, j: int) -> float:
    """CG error factor ``2 ((sqrt(kappa) - 1) / (sqrt(kappa) + 1))**j``."""
    if kappa < 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j == 0:
        return 2.0
    rk = np.sqrt(kappa)
    return float(2.0 * ((rk - 1.0) / (rk + 1.0)) ** j)


def chebyshev_multiplier(t, lambda_min: float, lambda_max: float, j: int):
    """Evaluate the scaled Chebyshev polynomial ``q*_j(t)`` by the three-term recurrence.

    Independent of :func:`gamma_coeffs`; used to cross-check its monomial
    expansion.
    """
    t = np.asarray(t, dtype=float)
    if lambda_max == lambda_min:
        return (1.0 - t / lambda_max) ** j
    width = lambda_max - lambda_min
    u = (lambda_max + lambda_min - 2.0 * t) / width
    u0 = (lambda_max + lambda_min) / width

    def cheb(x):
        t_prev, t_cur = np.ones_like(x), x
        if j == 0:
            return t_prev
        for _ in range(j - 1):
            t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
        return t_cur

    return cheb(u) / cheb(np.asarray(u0))


def gamma_coeffs(lambda_min: float, lambda_max: float, j: int) -> np.ndarray:
    """Monomial coefficients ``gamma_j0 .. gamma_jj`` of ``q*_j``.

    ``q*_j(t) = T_j((lmax + lmin - 2t)/(lmax - lmin)) / T_j((lmax + lmin)/(lmax - lmin))``
    so that ``q*_j(0) = 1``.  For ``lmin == lmax`` the polynomial is
    ``(1 - t/lambda)**j``.  The monomial basis is ill-conditioned; orders
    above 30 are rejected.
    """
    if not 0.0 < lambda_min <= lambda_max:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j > MAX_GAMMA_ORDER:
        raise ValueError(f"monomial expansion supported for j <= {MAX_GAMMA_ORDER}")
    if j == 0:
        return np.array([1.0])
    if lambda_min == lambda_max:
        return npoly.polypow(np.array([1.0, -1.0 / lambda_max]), j)
    width = lambda_max - lambda_min
    arg = np.array([(lambda_max + lambda_min) / width, -2.0 / width])
    t_prev, t_cur = np.array([1.0]), arg
    for _ in range(j - 1):
        t_prev, t_cur = t_cur, npoly.polysub(2.0 * npoly.polymul(arg, t_cur), t_prev)
    coeffs = np.zeros(j + 1)
    coeffs[: t_cur.size] = t_cur
    coeffs /= coeffs[0]
    if not np.all(np.isfinite(coeffs)):
        raise OverflowError("monomial Chebyshev coefficients overflowed")
    coeffs[0] = 1.0
    return coeffs


def v_star(P: ParametricMatrix, sigma, b, j: int, lambda_min: float,
           lambda_max: float) -> np.ndarray:
    """CG analysis candidate ``v*_j = (I - q*_j(A)) A^{-1} b``.

    Expanded in the Krylov basis this is ``-sum_{k=1..j} gamma_jk A^(k-1) b``,
    which makes ``x - v*_j = q*_j(A) x`` and hence
    ``||x - v*_j||_A <= cheb_bound(kappa, j) ||x||_A`` when the bounds
    bracket the spectrum.
    """
    b = P.check_vector(b)
    gamma = gamma_coeffs(lambda_min, lambda_max, j)
    out = np.zeros_like(b)
    w = b.copy()
    for k in range(1, j + 1):
        out -= gamma[k] * w
        if k < j:
            w = apply(P, sigma, w)
    return out
