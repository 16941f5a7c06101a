"""Affine matrix-valued functions A(sigma) = sum_i sigma_i A_i.

The family is stored densely as an ``(s, n, n)`` array of symmetric terms.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

log = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when operands of a parametric operation do not conform."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when A(sigma) (or a reduced counterpart) is not SPD."""


class ParametricMatrix:
    """Immutable affine family of symmetric matrices.

    Parameters
    ----------
    terms : sequence of array_like
        The ``s`` matrices ``A_1, ..., A_s``, all ``n x n``.  Terms are
        symmetrized on construction; an asymmetry above ``1e-12`` relative
        Frobenius norm is logged as a warning.
    """

    def __init__(self, terms):
        try:
            arr = np.array(terms, dtype=float, copy=True)
        except ValueError as exc:
            raise DimensionError(f"terms do not share one square shape: {exc}") from exc
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] != arr.shape[2]:
            raise DimensionError(
                f"expected s >= 1 square terms, got array of shape {arr.shape}")
        for i, a in enumerate(arr):
            scale = np.linalg.norm(a)
            asym = np.linalg.norm(a - a.T)
            if scale > 0 and asym > SYMMETRY_RTOL * scale:
                log.warning("term %d asymmetric (relative %.2e); symmetrizing",
                            i + 1, asym / scale)
            arr[i] = 0.5 * (a + a.T)
        arr.flags.writeable = False
        self._terms = arr

    @property
    def terms(self) -> np.ndarray:
        return self._terms

    @property
    def n(self) -> int:
        return self._terms.shape[1]

    @property
    def s(self) -> int:
        return self._terms.shape[0]

    def __len__(self):
        return self.s

    def __repr__(self):
        return f"ParametricMatrix(n={self.n}, s={self.s})"

    def check_sigma(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.s,):
            raise DimensionError(
                f"parameter vector must have length {self.s}, got shape {sigma.shape}")
        return sigma

    def check_vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise DimensionError(f"vector length {v.shape[0]} != n = {self.n}")
        return v


@dataclass(frozen=True)
class ParameterBox:
    """Componentwise bounds ``lower <= sigma <= upper`` defining S."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise DimensionError("lower and upper must be equal-length 1-D vectors")
        if np.any(lo > hi):
            raise ValueError("empty parameter box: lower > upper in some component")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lo: float, hi: float, s: int) -> "ParameterBox":
        return cls(np.full(s, lo), np.full(s, hi))

    @property
    def s(self) -> int:
        return self.lower.size

    def contains(self, sigma, atol: float = 0.0) -> bool:
        sigma = np.asarray(sigma, dtype=float)
        return bool(np.all(sigma >= self.lower - atol) and np.all(sigma <= self.upper + atol))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def evaluate(P: ParametricMatrix, sigma) -> np.ndarray:
    """Return the dense symmetric matrix ``sum_i sigma_i A_i``."""
    sigma = P.check_sigma(sigma)
    return np.tensordot(sigma, P.terms, axes=1)


def apply(P: ParametricMatrix, sigma, v) -> np.ndarray:
    """Matrix-free action ``sum_i sigma_i (A_i v)``.

    ``v`` may be a vector or an ``n x m`` block.
    """
    sigma = P.check_sigma(sigma)
    v = P.check_vector(v)
    out = np.zeros(v.shape)
    for si, a in zip(sigma, P.terms):
        if si != 0.0:
            out += si * (a @ v)
    return out


def kron_power(sigma, k: int) -> np.ndarray:
    """k-fold Kronecker power of ``sigma`` (left-factor-major).

    Block ``i`` of length ``s**(k-1)`` equals ``sigma[i] * kron_power(sigma, k-1)``.
    """
    sigma = np.asarray(sigma, dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be a positive integer")
    s = sigma.size
    if s > 1 and k * np.log(s) >= np.log(np.iinfo(np.intp).max):
        raise OverflowError(f"s**k = {s}**{k} exceeds the index range")
    out = sigma
    for _ in range(k - 1):
        out = np.kron(sigma, out)
    return out


def a_norm(P: ParametricMatrix, sigma, v, tol: float = 1e-12) -> float:
    """Energy norm ``sqrt(v^T A(sigma) v)``.

    Raises :class:`NotPositiveDefiniteError` if the quadratic form is
    negative beyond ``tol`` relative to ``||A v|| ||v||``.
    """
    v = P.check_vector(v)
    av = apply(P, sigma, v)
    q = float(v @ av)
    if q < 0.0:
        scale = np.linalg.norm(av) * np.linalg.norm(v)
        if q < -tol * max(scale, np.finfo(float).tiny):
            raise NotPositiveDefiniteError(
                f"v^T A(sigma) v = {q:.3e} < 0: A(sigma) is not positive definite")
        q = 0.0
    return float(np.sqrt(q))


def save_family(P: ParametricMatrix, path, b=None, extra_meta: dict | None = None):
    """Write the family as ``meta.json`` plus ``A_1.mtx ... A_s.mtx``.

    Terms are stored in MatrixMarket coordinate format with symmetric
    storage.  An optional right-hand side goes to ``b.mtx`` (array format).
    """
    os.makedirs(path, exist_ok=True)
    meta = {"n": P.n, "s": P.s}
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    for i, a in enumerate(P.terms, start=1):
        scipy.io.mmwrite(os.path.join(path, f"A_{i}.mtx"), sp.coo_matrix(a),
                         symmetry="symmetric", precision=17)
    if b is not None:
        b = np.asarray(b, dtype=float)
        scipy.io.mmwrite(os.path.join(path, "b.mtx"), b.reshape(P.n, -1), precision=17)


def load_family(path):
    """Read a family written by :func:`save_family`.

    Returns
    -------
    P : ParametricMatrix
    b : ndarray or None
        Contents of ``b.mtx`` if present (squeezed to 1-D for one column).
    meta : dict
    """
    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    n, s = int(meta["n"]), int(meta["s"])
    terms = []
    for i in range(1, s + 1):
        a = scipy.io.mmread(os.path.join(path, f"A_{i}.mtx"))
        a = a.toarray() if hasattr(a, "toarray") else np.asarray(a)
        if a.shape != (n, n):
            raise DimensionError(f"A_{i}.mtx has shape {a.shape}, meta says n={n}")
        terms.append(a)
    b = None
    bpath = os.path.join(path, "b.mtx")
    if os.path.exists(bpath):
        b = np.asarray(scipy.io.mmread(bpath), dtype=float)
        if b.shape[1] == 1:
            b = b[:, 0]
    return ParametricMatrix(terms), b, meta
