"""Linearisation function of an affine family and its normal-form recursion.

For ``A(sigma) = sum_i sigma_i A_i`` the linearisation function maps a block
``C`` to ``[A_1 C | ... | A_s C]``.  Its ``k``-th functional power applied to
``b`` satisfies ``L^k(b) @ kron_power(sigma, k) == A(sigma)^k b``.  The
explicit powers have ``s**k`` columns and exist here for testing only; the
builders use the ``n x n`` normal form ``L_k L_k^T`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paramsys import DimensionError, ParametricMatrix

DEFAULT_ENTRY_BUDGET = 10**6


class BudgetExceededError(MemoryError):
    """An explicit linearisation matrix would exceed the column budget."""


@dataclass(frozen=True)
class NormalForm:
    """Symmetric PSD matrix ``M = L_k L_k^T`` after ``k`` recursion steps."""

    M: np.ndarray
    k: int = 0

    @classmethod
    def initial(cls, b) -> "NormalForm":
        b = np.asarray(b, dtype=float).ravel()
        return cls(np.outer(b, b), 0)

    def singular_values(self) -> np.ndarray:
        """Singular values of ``L_k`` (nonincreasing), from the eigenvalues of M.

        Negative eigenvalues from rounding are clamped to zero here only;
        ``M`` itself is never modified.
        """
        lam = np.linalg.eigvalsh(0.5 * (self.M + self.M.T))
        return np.sqrt(np.maximum(lam[::-1], 0.0))


def _as_block(P: ParametricMatrix, C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != P.n:
        raise DimensionError(f"block has {C.shape[0]} rows, family has n = {P.n}")
    return C


def apply_linearisation(P: ParametricMatrix, C, max_columns: int | None = None) -> np.ndarray:
    """Return ``[A_1 C | A_2 C | ... | A_s C]`` (``n x s*m``).

    Parameters
    ----------
    P : ParametricMatrix
    C : array_like, shape (n,) or (n, m)
    max_columns : int, optional
        Refuse to build more than this many output columns.
    """
    C = _as_block(P, C)
    m = C.shape[1]
    if max_columns is not None and P.s * m > max_columns:
        raise BudgetExceededError(
            f"linearisation would produce {P.s * m} columns (budget {max_columns})")
    return np.hstack([a @ C for a in P.terms])


def explicit_linearisation_power(P: ParametricMatrix, b, k: int,
                                 max_columns: int | None = None) -> np.ndarray:
    """Explicit ``L^k(b)``, an ``n x s**k`` matrix.

    Column count grows exponentially; the default budget is ``10**6 / n``
    columns.  Intended as a test oracle.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_columns is None:
        max_columns = max(1, DEFAULT_ENTRY_BUDGET // P.n)
    if k * np.log(P.s) > np.log(max_columns) + 1e-12:
        raise BudgetExceededError(
            f"L^{k}(b) has {P.s}**{k} columns (budget {max_columns})")
    C = _as_block(P, b)
    if C.shape[1] != 1:
        raise DimensionError("b must be a single vector")
    for _ in range(k):
        C = apply_linearisation(P, C)
    return C


def normal_form_step(P: ParametricMatrix, nf: NormalForm) -> NormalForm:
    """Advance ``L_{k-1} L_{k-1}^T`` to ``L_k L_k^T = sum_i A_i M A_i^T``.

    Terms are accumulated in index order 1..s so that repeated builds are
    bit-identical.
    """
    M = np.asarray(nf.M)
    if M.shape != (P.n, P.n):
        raise DimensionError(f"normal form has shape {M.shape}, family has n = {P.n}")
    out = np.zeros_like(M)
    for a in P.terms:
        out += a @ M @ a.T
    return NormalForm(out, nf.k + 1)


def normal_form(P: ParametricMatrix, b, k: int) -> NormalForm:
    """``L_k L_k^T`` by ``k`` applications of :func:`normal_form_step`."""
    nf = NormalForm.initial(P.check_vector(b))
    for _ in range(k):
        nf = normal_form_step(P, nf)
    return nf
