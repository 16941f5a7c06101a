"""Independent reference computations shared by the test modules.

Everything here is built from plain numpy/scipy calls on explicit dense
matrices so it does not share code paths with the package under test.
"""

import numpy as np
import scipy.linalg


def random_spd_terms(rng, n, s, shift=0.5):
    """``s`` symmetric positive definite ``n x n`` terms, eigenvalues roughly in [shift, shift + 2]."""
    terms = []
    for _ in range(s):
        G = rng.standard_normal((n, n)) / np.sqrt(n)
        terms.append(G @ G.T + shift * np.eye(n))
    return np.array(terms)


def dense_matrix(terms, sigma):
    return sum(si * a for si, a in zip(sigma, terms))


def krylov_matrix(A, b, j):
    cols = [b]
    for _ in range(j - 1):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def orth(X, rtol=1e-12):
    U, sv, _ = np.linalg.svd(X, full_matrices=False)
    if sv.size == 0:
        return U[:, :0]
    return U[:, : int(np.count_nonzero(sv > rtol * sv[0]))]


def galerkin(A, b, Q):
    z = np.linalg.solve(Q.T @ A @ Q, Q.T @ b)
    return Q @ z


def energy(A, v):
    return float(np.sqrt(max(v @ A @ v, 0.0)))


def explicit_power(terms, b, k):
    """``L^k(b)`` by repeated block concatenation, term-major."""
    C = b[:, None]
    for _ in range(k):
        C = np.hstack([a @ C for a in terms])
    return C


def kron_chain(sigma, k):
    out = np.array([1.0])
    for _ in range(k):
        out = np.kron(sigma, out)
    return out


def delta_truncate(X, delta):
    """Full ``delta``-accurate truncation ``U_r S_r V_r^T`` of ``X``."""
    U, sv, Vt = np.linalg.svd(X, full_matrices=False)
    r = int(np.count_nonzero(sv >= delta))
    return (U[:, :r] * sv[:r]) @ Vt[:r]


def max_principal_angle(X, Y):
    if X.shape[1] == 0 and Y.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(X, Y)))


def poisson_center_value(terms=200):
    """``u(1/2, 1/2)`` for ``-Laplace u = 1`` on the unit square, zero boundary values.

    Double sine series ``u = sum 16 / (pi^4 m k (m^2 + k^2)) sin(m pi x) sin(k pi y)``
    over odd ``m, k``.
    """
    m = np.arange(1, 2 * terms, 2)
    M, K = np.meshgrid(m, m)
    coef = 16.0 / (np.pi**4 * M * K * (M**2 + K**2))
    sx = np.sin(M * np.pi / 2)
    sy = np.sin(K * np.pi / 2)
    return float(np.sum(coef * sx * sy))
