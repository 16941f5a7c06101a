"""Triangular meshes of the unit square (optionally with a circular hole).

Text format::

    nodes <count>
    x y boundary_flag          # one line per node
    triangles <count>
    i j k subdomain_tag        # 0-based node indices, one line per triangle
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Malformed mesh file or invalid mesh geometry."""


@dataclass
class Mesh:
    nodes: np.ndarray        # (N, 2) float
    triangles: np.ndarray    # (T, 3) int, counter-clockwise
    tags: np.ndarray         # (T,) int, subdomain tags >= 1
    boundary: np.ndarray     # (N,) bool, homogeneous Dirichlet nodes

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.tags = np.asarray(self.tags, dtype=np.int64).ravel()
        self.boundary = np.asarray(self.boundary, dtype=bool).ravel()
        if self.tags.size != self.triangles.shape[0]:
            raise MeshError("one subdomain tag per triangle required")
        if self.boundary.size != self.nodes.shape[0]:
            raise MeshError("one boundary flag per node required")

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def boundary_edges(self) -> np.ndarray:
        """Edges that belong to exactly one triangle, as sorted node pairs."""
        t = self.triangles
        edges = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return uniq[counts == 1]


def validate_mesh(mesh: Mesh, area_tol: float = 1e-14) -> list[str]:
    """Return a list of problems (empty if the mesh is valid)."""
    problems = []
    n = mesh.num_nodes
    if mesh.triangles.size and (mesh.triangles.min() < 0 or mesh.triangles.max() >= n):
        problems.append("triangle references a node index out of range")
        return problems
    areas = mesh.signed_areas()
    bad = np.flatnonzero(areas <= area_tol)
    if bad.size:
        problems.append(f"{bad.size} triangles not positively oriented (first: {bad[0]})")
    if np.any(mesh.tags < 1):
        problems.append("subdomain tags must be >= 1")
    be = mesh.boundary_edges()
    unflagged = np.unique(be[~mesh.boundary[be].all(axis=1)])
    if unflagged.size:
        problems.append(f"{unflagged.size} nodes on boundary edges are not flagged")
    used = np.zeros(n, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        problems.append(f"{np.count_nonzero(~used)} nodes belong to no triangle")
    return problems


def structured_square_mesh(divisions: int) -> Mesh:
    """Uniform triangulation of the unit square.

    ``divisions`` squares per side, each cut along the diagonal from its
    lower-left to its upper-right corner.  All tags are 1 and every node on
    the outer boundary is flagged.
    """
    if divisions < 1:
        raise MeshError("divisions must be >= 1")
    d = divisions
    coords = np.arange(d + 1) / d
    X, Y = np.meshgrid(coords, coords)  # Y varies along axis 0
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((d + 1) ** 2).reshape(d + 1, d + 1)
    ll = idx[:-1, :-1].ravel()
    lr = idx[:-1, 1:].ravel()
    ul = idx[1:, :-1].ravel()
    ur = idx[1:, 1:].ravel()
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * ll.size, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    on_edge = (np.isclose(nodes, 0.0) | np.isclose(nodes, 1.0)).any(axis=1)
    return Mesh(nodes, triangles, np.ones(triangles.shape[0], dtype=np.int64), on_edge)


def checkerboard_tags(mesh: Mesh, N: int, M: int) -> np.ndarray:
    """Tag ``row * M + col + 1`` for ``N`` horizontal by ``M`` vertical strips."""
    c = mesh.centroids()
    row = np.minimum((c[:, 1] * N).astype(int), N - 1)
    col = np.minimum((c[:, 0] * M).astype(int), M - 1)
    return row * M + col + 1


def strip_tags(mesh: Mesh, edges=(1.0 / 3.0, 2.0 / 3.0)) -> np.ndarray:
    """Tag 1, 2, ... for horizontal strips separated at the given heights."""
    return np.searchsorted(np.asarray(edges), mesh.centroids()[:, 1]) + 1


def _compact(nodes, triangles, keep_tri):
    triangles = triangles[keep_tri]
    used = np.zeros(nodes.shape[0], dtype=bool)
    used[triangles.ravel()] = True
    new_index = -np.ones(nodes.shape[0], dtype=np.int64)
    new_index[used] = np.arange(np.count_nonzero(used))
    return nodes[used], new_index[triangles], used


def square_with_hole_mesh(divisions: int, center=(0.5, 0.5), radius: float = 0.15,
                          fixed_heights=(1.0 / 3.0, 2.0 / 3.0)) -> Mesh:
    """Unit square minus a polygonal approximation of a disc.

    Triangles of a structured mesh with any vertex strictly inside the disc
    are removed, so every node of the new inner boundary lies on or outside
    the circle.  Those nodes are then moved radially inward onto the
    circle, except nodes lying on one of ``fixed_heights`` (strip
    interfaces stay straight).  Triangles are tagged by horizontal strip.
    """
    base = structured_square_mesh(divisions)
    center = np.asarray(center, dtype=float)
    # a centroid test leaves nodes inside the disc whose outward move can invert elements
    inside = (np.linalg.norm(base.nodes - center, axis=1) < radius)[base.triangles].any(axis=1)
    nodes, triangles, used = _compact(base.nodes, base.triangles, ~inside)
    outer = base.boundary[used]
    mesh = Mesh(nodes, triangles, np.ones(triangles.shape[0], dtype=np.int64), outer)
    be = mesh.boundary_edges()
    on_hole = np.zeros(mesh.num_nodes, dtype=bool)
    on_hole[be.ravel()] = True
    on_hole &= ~outer
    fixed = np.zeros(mesh.num_nodes, dtype=bool)
    for h in fixed_heights:
        fixed |= np.isclose(nodes[:, 1], h, atol=1e-12, rtol=0.0)
    move = on_hole & ~fixed
    rel = nodes[move] - center
    nodes = nodes.copy()
    nodes[move] = center + radius * rel / np.linalg.norm(rel, axis=1)[:, None]
    mesh = Mesh(nodes, triangles, np.ones(triangles.shape[0], dtype=np.int64), outer | on_hole)
    mesh.tags = strip_tags(mesh, fixed_heights)
    if np.any(mesh.signed_areas() <= 0):
        raise MeshError("hole projection inverted triangles; use a finer mesh")
    return mesh


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.num_nodes}\n")
        for (x, y), flag in zip(mesh.nodes, mesh.boundary):
            fh.write(f"{float(x)!r} {float(y)!r} {int(flag)}\n")
        fh.write(f"triangles {mesh.num_triangles}\n")
        for (i, j, k), tag in zip(mesh.triangles, mesh.tags):
            fh.write(f"{i} {j} {k} {tag}\n")


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        pos = 0
        key, count = lines[pos]
        if key != "nodes":
            raise MeshError(f"expected 'nodes <count>', got {' '.join(lines[pos])!r}")
        nn = int(count)
        node_rows = lines[pos + 1: pos + 1 + nn]
        pos += 1 + nn
        key, count = lines[pos]
        if key != "triangles":
            raise MeshError(f"expected 'triangles <count>', got {' '.join(lines[pos])!r}")
        nt = int(count)
        tri_rows = lines[pos + 1: pos + 1 + nt]
        if len(node_rows) != nn or len(tri_rows) != nt or len(lines) != pos + 1 + nt:
            raise MeshError("entry counts do not match the header counts")
        if any(len(r) != 3 for r in node_rows) or any(len(r) != 4 for r in tri_rows):
            raise MeshError("wrong number of fields on a node or triangle line")
        nodes = np.array([[float(r[0]), float(r[1])] for r in node_rows]).reshape(-1, 2)
        flags = np.array([int(r[2]) != 0 for r in node_rows], dtype=bool)
        tris = np.array([[int(v) for v in r[:3]] for r in tri_rows], dtype=np.int64).reshape(-1, 3)
        tags = np.array([int(r[3]) for r in tri_rows], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if tris.size and (tris.min() < 0 or tris.max() >= nn):
        raise MeshError("triangle references a node index out of range")
    return Mesh(nodes, tris, tags, flags)
