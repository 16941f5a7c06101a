"""Offline construction of compound Krylov (CK) bases.

Three builders share one output type, :class:`ReducedBasis`:

* :func:`build_ck_exact` -- ranges of the explicit linearisation powers
  (exponential column growth, small problems only).
* :func:`build_ck1` -- truncated eigendecomposition of the projected
  normal form ``(I - QQ^T) L_k L_k^T (I - QQ^T)``.
* :func:`build_ck2` -- recursively truncated carriers ``C_k`` whose columns
  are re-linearised at every step.

Every builder starts from ``b / ||b||`` and only ever appends columns, so
the basis of order ``j`` is a column prefix of the basis of order ``j + 1``.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.io
import scipy.linalg

from .krylov import gamma_coeffs
from .linearise import (
    BudgetExceededError,
    NormalForm,
    apply_linearisation,
    explicit_linearisation_power,
    normal_form_step,
)
from .paramsys import DimensionError, ParametricMatrix

log = logging.getLogger(__name__)

METHODS = ("exact", "ck1", "ck2")
DROP_TOL = 1e-12
EXACT_RANK_RTOL = 1e-12
DEFAULT_COLUMN_BUDGET = 200_000


class BuildError(RuntimeError):
    """An offline build failed at a particular step."""

    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class CutoffSchedule:
    """Cut-off tolerances ``delta_1 .. delta_{j-1}`` for an order-``j`` build."""

    deltas: tuple[float, ...]

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        if any(not d > 0.0 for d in deltas):
            raise ValueError("cut-off tolerances must be positive")
        object.__setattr__(self, "deltas", deltas)

    @classmethod
    def constant(cls, delta: float, j: int) -> "CutoffSchedule":
        if j < 1:
            raise ValueError("order j must be >= 1")
        return cls((float(delta),) * (j - 1))

    @property
    def j(self) -> int:
        return len(self.deltas) + 1

    def __len__(self):
        return len(self.deltas)

    def delta(self, k: int) -> float:
        """Tolerance for step ``k`` (1-based)."""
        return self.deltas[k - 1]


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal basis ``Q`` of a compound Krylov subspace.

    Attributes
    ----------
    Q : ndarray, shape (n, m)
    method : {'exact', 'ck1', 'ck2'}
    order : int
        CK order ``j``.
    deltas : tuple of float
        Cut-off tolerances used (empty for ``exact``).
    ranks : tuple of int
        Truncation rank ``r_k`` found at each step ``k = 1 .. j-1``.
    added : tuple of int
        Columns actually appended at each step (``ranks`` minus columns
        dropped during re-orthogonalization).
    spectra : tuple of ndarray
        Full nonincreasing singular-value spectrum examined at each step.
    carriers : tuple of ndarray, optional
        ``C_k`` factors of the CK2 recursion (not persisted).
    """

    Q: np.ndarray
    method: str
    order: int
    deltas: tuple = ()
    ranks: tuple = ()
    added: tuple = ()
    spectra: tuple = field(default=(), repr=False)
    carriers: tuple | None = field(default=None, repr=False)
    variant: str | None = None

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    def prefix(self, order: int) -> "ReducedBasis":
        """Basis of a lower order ``1 <= order <= self.order`` (a column prefix)."""
        if not 1 <= order <= self.order:
            raise ValueError(f"order must lie in [1, {self.order}]")
        m = 1 + sum(self.added[: order - 1])
        return replace(
            self,
            Q=self.Q[:, :m],
            order=order,
            deltas=self.deltas[: order - 1],
            ranks=self.ranks[: order - 1],
            added=self.added[: order - 1],
            spectra=self.spectra[: order - 1],
            carriers=None if self.carriers is None else self.carriers[:order],
        )

    def orthonormality_error(self) -> float:
        return float(np.linalg.norm(self.Q.T @ self.Q - np.eye(self.dim)))


def truncate_spectrum(values, delta: float) -> int:
    """Rank of the ``delta``-accurate low-rank approximation.

    Returns the largest ``r`` with ``values[r-1] >= delta`` (values equal to
    ``delta`` are kept), or 0 if every value is below ``delta``.
    """
    values = np.asarray(values, dtype=float).ravel()
    if delta <= 0:
        raise ValueError("delta must be positive")
    if values.size and np.any(np.diff(values) > 0):
        raise ValueError("singular values must be sorted nonincreasing")
    return int(np.count_nonzero(values >= delta))


def _start(P: ParametricMatrix, b) -> tuple[np.ndarray, np.ndarray]:
    b = np.asarray(b, dtype=float).ravel()
    if b.size != P.n:
        raise DimensionError(f"b has length {b.size}, family has n = {P.n}")
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise ValueError("right-hand side b must be nonzero")
    return b, (b / nb)[:, None]


def _project_out(Q: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``(I - QQ^T) W`` computed twice (classical Gram-Schmidt with reorthogonalization)."""
    for _ in range(2):
        W = W - Q @ (Q.T @ W)
    return W


def append_orthonormal(Q: np.ndarray, W: np.ndarray, drop_tol: float = DROP_TOL) -> np.ndarray:
    """Append the columns of ``W`` to ``Q``, keeping ``Q`` orthonormal.

    Each column is orthogonalized against the current basis twice and
    dropped if its remaining norm falls below ``drop_tol``.  ``W`` is
    expected to have unit-norm columns.
    """
    if W.shape[1] == 0:
        return Q
    W = _project_out(Q, W)
    new = []
    for w in W.T:
        for _ in range(2):
            for q in new:
                w = w - (q @ w) * q
        nw = np.linalg.norm(w)
        if nw < drop_tol:
            continue
        new.append(w / nw)
    if not new:
        return Q
    return np.hstack([Q, np.column_stack(new)])


def _projected_normal_form(M: np.ndarray, Q: np.ndarray) -> np.ndarray:
    X = M - Q @ (Q.T @ M)
    X = X - (X @ Q) @ Q.T
    return 0.5 * (X + X.T)


def _check_schedule(j: int, schedule) -> CutoffSchedule:
    if j < 1:
        raise ValueError("order j must be >= 1")
    if not isinstance(schedule, CutoffSchedule):
        if np.isscalar(schedule):
            schedule = CutoffSchedule.constant(float(schedule), j)
        else:
            schedule = CutoffSchedule(tuple(schedule))
    if len(schedule) != j - 1:
        raise ValueError(f"schedule has {len(schedule)} tolerances, order {j} needs {j - 1}")
    return schedule


def build_ck1(P: ParametricMatrix, b, j: int, schedule) -> ReducedBasis:
    """Basis of the approximate CK subspace of the first kind.

    For ``k = 1 .. j-1`` the normal form ``L_k L_k^T`` is advanced by one
    recursion step, projected onto the orthogonal complement of the current
    basis and eigendecomposed.  Eigenvectors whose singular value
    ``sqrt(lambda)`` is at least ``delta_k`` are appended.

    Parameters
    ----------
    P : ParametricMatrix
    b : array_like, shape (n,)
    j : int
        CK order.
    schedule : CutoffSchedule, float or sequence of float
        A scalar is expanded to the constant schedule.
    """
    schedule = _check_schedule(j, schedule)
    b, Q = _start(P, b)
    nf = NormalForm.initial(b)
    ranks, added, spectra = [], [], []
    for k in range(1, j):
        nf = normal_form_step(P, nf)
        try:
            lam, U = scipy.linalg.eigh(_projected_normal_form(nf.M, Q))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise BuildError(k, f"eigendecomposition failed: {exc}") from exc
        lam, U = lam[::-1], U[:, ::-1]
        sv = np.sqrt(np.maximum(lam, 0.0))
        r = truncate_spectrum(sv, schedule.delta(k))
        m_before = Q.shape[1]
        Q = append_orthonormal(Q, U[:, :r])
        ranks.append(r)
        added.append(Q.shape[1] - m_before)
        spectra.append(sv)
        log.debug("ck1 step %d: rank %d, dim %d", k, r, Q.shape[1])
    return ReducedBasis(Q, "ck1", j, schedule.deltas, tuple(ranks), tuple(added), tuple(spectra))


def build_ck2(P: ParametricMatrix, b, j: int, schedule, variant: str = "algorithm",
              max_columns: int = DEFAULT_COLUMN_BUDGET) -> ReducedBasis:
    """Basis of the approximate CK subspace of the second kind.

    ``variant='algorithm'`` (default) follows the practical recursion: the
    projected block ``(I - QQ^T) L(C_{k-1})`` is SVD-truncated, its left
    singular vectors are appended to ``Q`` and ``C_k = U_r S_r``.

    ``variant='definition'`` keeps the carrier recursion unprojected:
    ``C_k = U_r S_r`` from the truncated SVD of ``L(C_{k-1})`` itself, so
    that ``range(C_k)`` equals the range of the approximate linearisation
    matrix; ``range(C_k)`` is then added to ``Q``.
    """
    if variant not in ("algorithm", "definition"):
        raise ValueError(f"unknown CK2 variant {variant!r}")
    schedule = _check_schedule(j, schedule)
    b, Q = _start(P, b)
    C = b[:, None]
    carriers = [C]
    ranks, added, spectra = [], [], []
    for k in range(1, j):
        try:
            LC = apply_linearisation(P, C, max_columns=max_columns)
        except BudgetExceededError as exc:
            raise BuildError(k, str(exc)) from exc
        target = _project_out(Q, LC) if variant == "algorithm" else LC
        try:
            U, sv, _ = scipy.linalg.svd(target, full_matrices=False, lapack_driver="gesdd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise BuildError(k, f"SVD failed: {exc}") from exc
        r = truncate_spectrum(sv, schedule.delta(k))
        C = U[:, :r] * sv[:r]
        m_before = Q.shape[1]
        if variant == "algorithm":
            Q = append_orthonormal(Q, U[:, :r])
        else:
            Q = _append_range(Q, U[:, :r])
        ranks.append(r)
        added.append(Q.shape[1] - m_before)
        spectra.append(sv)
        carriers.append(C)
        log.debug("ck2 step %d: rank %d, dim %d", k, r, Q.shape[1])
    return ReducedBasis(Q, "ck2", j, schedule.deltas, tuple(ranks), tuple(added),
                        tuple(spectra), tuple(carriers), variant)


def _append_range(Q: np.ndarray, W: np.ndarray, rtol: float = DROP_TOL) -> np.ndarray:
    """Append an orthonormal basis of ``range((I - QQ^T) W)``, rank-revealed by SVD."""
    if W.shape[1] == 0:
        return Q
    R = _project_out(Q, W)
    scale = max(np.linalg.norm(W, 2), np.finfo(float).tiny)
    U, sv, _ = scipy.linalg.svd(R, full_matrices=False)
    r = int(np.count_nonzero(sv > rtol * scale))
    return append_orthonormal(Q, U[:, :r])


def build_ck_exact(P: ParametricMatrix, b, j: int,
                   max_columns: int | None = None) -> ReducedBasis:
    """Basis of the exact CK subspace ``span{b} + range(L^1(b)) + ... + range(L^{j-1}(b))``.

    Each explicit power is projected against the current basis and
    rank-revealed by SVD with tolerance ``1e-12 * ||L^k(b)||_2``.
    """
    if j < 1:
        raise ValueError("order j must be >= 1")
    b, Q = _start(P, b)
    ranks, added, spectra = [], [], []
    for k in range(1, j):
        try:
            Lk = explicit_linearisation_power(P, b, k, max_columns=max_columns)
        except BudgetExceededError as exc:
            raise BuildError(k, str(exc)) from exc
        scale = np.linalg.norm(Lk, 2)
        U, sv, _ = scipy.linalg.svd(_project_out(Q, Lk), full_matrices=False)
        r = int(np.count_nonzero(sv > EXACT_RANK_RTOL * scale))
        m_before = Q.shape[1]
        Q = append_orthonormal(Q, U[:, :r])
        ranks.append(r)
        added.append(Q.shape[1] - m_before)
        spectra.append(sv)
    return ReducedBasis(Q, "exact", j, (), tuple(ranks), tuple(added), tuple(spectra))


def build_basis(method: str, P: ParametricMatrix, b, j: int, schedule=None, **kwargs) -> ReducedBasis:
    """Dispatch to the builder named by ``method``."""
    if method == "exact":
        return build_ck_exact(P, b, j, **kwargs)
    if method == "ck1":
        return build_ck1(P, b, j, schedule)
    if method == "ck2":
        return build_ck2(P, b, j, schedule, **kwargs)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def union_basis(bases, drop_tol: float = DROP_TOL) -> ReducedBasis:
    """Orthonormal basis of the sum of several subspaces.

    Used when several right-hand sides share one reduced space.  The first
    basis is kept verbatim; the others are appended after
    re-orthogonalization.  Per-step metadata refers to the first basis.
    """
    bases = list(bases)
    Q = bases[0].Q
    for other in bases[1:]:
        if other.n != bases[0].n:
            raise DimensionError("bases live in different spaces")
        Q = append_orthonormal(Q, other.Q, drop_tol)
    return replace(bases[0], Q=Q, carriers=None)


def suggest_cutoffs(tol: float, j: int, kappa_bound: float, lambda_max_bound: float,
                    sigma_norm_bound: float) -> CutoffSchedule:
    """Constant cut-off schedule meeting the CK1 a-priori tolerance condition.

    With ``gamma`` the scaled-Chebyshev coefficients for the spectrum
    ``[lambda_max_bound / kappa_bound, lambda_max_bound]`` and
    ``||sigma^{(x)k}|| <= sigma_norm_bound**k``, returns

        delta = tol / (j * lambda_max_bound * max_k |gamma_{j,k+1}| sigma_norm_bound**k)

    which bounds the sum over ``k = 1 .. j-1`` by ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not (np.isfinite(kappa_bound) and np.isfinite(lambda_max_bound)
            and np.isfinite(sigma_norm_bound)):
        raise ValueError("bounds must be finite")
    if kappa_bound < 1 or lambda_max_bound <= 0 or sigma_norm_bound <= 0:
        raise ValueError("need kappa_bound >= 1 and positive lambda/sigma bounds")
    if j <= 1:
        return CutoffSchedule(())
    gamma = gamma_coeffs(lambda_max_bound / kappa_bound, lambda_max_bound, j)
    weights = [abs(gamma[k + 1]) * sigma_norm_bound**k for k in range(1, j)]
    worst = max(weights)
    if worst == 0.0:
        worst = np.finfo(float).tiny
    return CutoffSchedule.constant(tol / (j * lambda_max_bound * worst), j)


def ck1_error_budget(deltas, gamma, lambda_max: float, sigma_norm: float) -> float:
    """Aggregate ``lambda_max * sum_k delta_k |gamma_{j,k+1}| ||sigma||^k`` for CK1."""
    return float(lambda_max * sum(d * abs(gamma[k + 1]) * sigma_norm**k
                                  for k, d in enumerate(deltas, start=1)))


def ck2_error_budget(deltas, gamma, lambda_max: float, a_norm2: float, sigma_norm: float) -> float:
    """CK2 analogue: inner sums ``sum_{l<=k} delta_l ||A||^(k-l) ||sigma||^l``."""
    total = 0.0
    for k in range(1, len(deltas) + 1):
        inner = sum(deltas[l - 1] * a_norm2 ** (k - l) * sigma_norm**l for l in range(1, k + 1))
        total += abs(gamma[k + 1]) * inner
    return float(lambda_max * total)


def save_basis(basis: ReducedBasis, path) -> None:
    """Persist as ``basis.meta.json`` plus ``Q.mtx`` (dense array, column-major)."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "method": basis.method,
        "j": basis.order,
        "deltas": list(basis.deltas),
        "ranks": list(basis.ranks),
        "added": list(basis.added),
        "n": basis.n,
        "m": basis.dim,
    }
    if basis.variant is not None:
        meta["variant"] = basis.variant
    with open(os.path.join(path, "basis.meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    scipy.io.mmwrite(os.path.join(path, "Q.mtx"), basis.Q, precision=17)


def load_basis(path) -> ReducedBasis:
    with open(os.path.join(path, "basis.meta.json")) as fh:
        meta = json.load(fh)
    Q = np.asarray(scipy.io.mmread(os.path.join(path, "Q.mtx")), dtype=float)
    if Q.shape != (meta["n"], meta["m"]):
        raise DimensionError(f"Q.mtx has shape {Q.shape}, metadata says ({meta['n']}, {meta['m']})")
    return ReducedBasis(
        Q,
        meta["method"],
        int(meta["j"]),
        tuple(meta.get("deltas", ())),
        tuple(meta.get("ranks", ())),
        tuple(meta.get("added", meta.get("ranks", ()))),
        variant=meta.get("variant"),
    )
