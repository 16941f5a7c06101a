"""P1 stiffness and load assembly with piecewise-constant coefficients."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, MeshError


def p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients ``(T, 3, 2)`` and triangle areas ``(T,)``."""
    p = mesh.nodes[mesh.triangles]
    areas = mesh.signed_areas()
    if np.any(areas <= 0.0):
        raise MeshError(f"{np.count_nonzero(areas <= 0)} degenerate or inverted triangles")
    grads = np.empty((p.shape[0], 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        # gradient of the hat function at vertex a: rotated opposite edge / (2 area)
        grads[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        grads[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def local_stiffness(mesh: Mesh, coefficient) -> np.ndarray:
    """Element matrices ``area * G C G^T`` for a per-triangle 2x2 coefficient ``(T, 2, 2)``."""
    grads, areas = p1_gradients(mesh)
    return areas[:, None, None] * np.einsum("tai,tij,tbj->tab", grads, coefficient, grads)


def _coefficient_field(mesh: Mesh, pattern: dict) -> np.ndarray:
    C = np.zeros((mesh.num_triangles, 2, 2))
    for tag, value in pattern.items():
        value = np.asarray(value, dtype=float)
        if value.ndim == 0:
            value = value * np.eye(2)
        C[mesh.tags == tag] = value
    return C


def assemble_matrix(mesh: Mesh, pattern: dict) -> np.ndarray:
    """Dense stiffness matrix on all nodes for ``{tag: coefficient}``.

    Coefficients are scalars (isotropic) or 2x2 matrices; tags missing from
    the pattern contribute nothing.
    """
    local = local_stiffness(mesh, _coefficient_field(mesh, pattern))
    K = np.zeros((mesh.num_nodes, mesh.num_nodes))
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    np.add.at(K, (rows.ravel(), cols.ravel()), local.reshape(-1))
    return K


def assemble_subdomain_stiffness(mesh: Mesh, patterns, eliminate: bool = True) -> list[np.ndarray]:
    """One stiffness matrix per coefficient pattern.

    Parameters
    ----------
    mesh : Mesh
    patterns : sequence of dict
        ``patterns[i]`` maps subdomain tags to the coefficient of term ``i``.
    eliminate : bool
        Restrict to free (non-Dirichlet) nodes.
    """
    free = mesh.free_nodes
    out = []
    for pattern in patterns:
        K = assemble_matrix(mesh, pattern)
        if eliminate:
            K = K[np.ix_(free, free)]
        out.append(0.5 * (K + K.T))
    return out


def assemble_load(mesh: Mesh, f=1.0, eliminate: bool = True) -> np.ndarray:
    """Load vector ``int f phi_i`` by the three-point vertex rule.

    ``f`` may be a constant, a callable ``f(x, y)`` evaluated at the
    vertices, or a ``{tag: value}`` dict for piecewise-constant data (then
    integrated exactly).
    """
    _, areas = p1_gradients(mesh)
    if isinstance(f, dict):
        per_tri = np.zeros(mesh.num_triangles)
        for tag, value in f.items():
            per_tri[mesh.tags == tag] = value
        vals = np.repeat(per_tri[:, None], 3, axis=1)
    elif callable(f):
        p = mesh.nodes[mesh.triangles]
        vals = np.asarray(f(p[..., 0], p[..., 1]), dtype=float)
    else:
        vals = np.full((mesh.num_triangles, 3), float(f))
    contrib = vals * (areas / 3.0)[:, None]
    b = np.zeros(mesh.num_nodes)
    np.add.at(b, mesh.triangles.ravel(), contrib.ravel())
    return b[mesh.free_nodes] if eliminate else b


def nodal_field(mesh: Mesh, free_values) -> np.ndarray:
    """Extend free-node values by zero to all mesh nodes."""
    u = np.zeros(mesh.num_nodes)
    u[mesh.free_nodes] = free_values
    return u
