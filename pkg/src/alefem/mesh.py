"""Structured triangular meshes of the unit square referent domain.

The referent mesh is built once and never moves; domain motion is carried
entirely by nodal displacement fields (see :mod:`alefem.ale`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIRICHLET = 1


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with marked boundary edges.

    nodes: (n_nodes, 2) referent coordinates.
    triangles: (n_triangles, 3) node indices, counterclockwise.
    boundary_edges: (n_bedges, 2) node pairs tracing the boundary.
    boundary_markers: (n_bedges,) integer markers, DIRICHLET everywhere here.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.boundary_markers):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def areas(self) -> np.ndarray:
        """Signed triangle areas; positive for counterclockwise orientation."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def boundary_node_set(self) -> np.ndarray:
        """Sorted indices of nodes lying on marked boundary edges."""
        return np.unique(self.boundary_edges)

    def dump(self, stream) -> None:
        """Plain-text listing: one node per line "i x y",
        then one triangle per line "e n0 n1 n2"."""
        for i, (x, y) in enumerate(self.nodes):
            stream.write(f"{i} {x:.17g} {y:.17g}\n")
        for e, (a, b, c) in enumerate(self.triangles):
            stream.write(f"{e} {a} {b} {c}\n")


def element_area(mesh: Mesh, elem: int) -> float:
    """Signed area of one triangle."""
    p = mesh.nodes[mesh.triangles[elem]]
    d1 = p[1] - p[0]
    d2 = p[2] - p[0]
    return 0.5 * float(d1[0] * d2[1] - d1[1] * d2[0])


def build_unit_square_mesh(nx: int, ny: int) -> Mesh:
    """Structured mesh of [0,1]^2 with nx-by-ny cells, each split along the
    bottom-left to top-right diagonal. All four sides carry the Dirichlet
    marker."""
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")

    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int32)
    k = 0
    for j in range(ny):
        for i in range(nx):
            n0 = nid(i, j)
            n1 = nid(i + 1, j)
            n2 = nid(i, j + 1)
            n3 = nid(i + 1, j + 1)
            tris[k] = (n0, n1, n3)
            tris[k + 1] = (n0, n3, n2)
            k += 2

    edges = []
    for i in range(nx):
        edges.append((nid(i, 0), nid(i + 1, 0)))
    for j in range(ny):
        edges.append((nid(nx, j), nid(nx, j + 1)))
    for i in range(nx, 0, -1):
        edges.append((nid(i, ny), nid(i - 1, ny)))
    for j in range(ny, 0, -1):
        edges.append((nid(0, j), nid(0, j - 1)))
    bedges = np.asarray(edges, dtype=np.int32)
    markers = np.full(len(edges), DIRICHLET, dtype=np.int32)

    return Mesh(nodes, tris, bedges, markers)
