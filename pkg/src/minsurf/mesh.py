"""Structured tetrahedral background mesh of a box.

Every hexahedral cell is split into six tetrahedra sharing the main
diagonal (Kuhn subdivision). All cells are split the same way, so the
tetrahedra of neighbouring cells meet in conforming faces.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations

import numpy as np

from .errors import MeshError

__all__ = [
    "BoxDomain",
    "BackgroundMesh",
    "ElementGeometry",
    "FaceAdjacency",
    "build_box_mesh",
    "build_face_adjacency",
    "element_geometry",
    "write_mesh_vtk",
]

# local vertex opposite to each local face
_FACE_LOCAL = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True)
class BoxDomain:
    """Axis aligned box ``[lo, hi]`` with ``divisions`` cells per axis."""

    lo: tuple
    hi: tuple
    divisions: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        div = tuple(int(v) for v in self.divisions)
        if len(lo) != 3 or len(hi) != 3 or len(div) != 3:
            raise ValueError("BoxDomain needs 3 components for lo, hi and divisions")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lo={lo}, hi={hi}")
        if any(d < 1 for d in div):
            raise ValueError(f"divisions must be >= 1, got {div}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "divisions", div)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def with_divisions(self, divisions):
        return BoxDomain(self.lo, self.hi, divisions)


@dataclass(frozen=True)
class FaceAdjacency:
    """Unique triangular faces of a tetrahedral mesh.

    Attributes
    ----------
    nodes : ndarray, shape (F, 3)
        Sorted node triple of every face (the canonical key).
    left : ndarray, shape (F,)
        First incident element (lower element index).
    right : ndarray, shape (F,)
        Second incident element, ``-1`` on the boundary.
    element_faces : ndarray, shape (T, 4)
        Face index of the facet opposite each local vertex.
    """

    nodes: np.ndarray
    left: np.ndarray
    right: np.ndarray
    element_faces: np.ndarray

    @property
    def internal(self):
        return self.right >= 0

    @property
    def n_faces(self):
        return len(self.left)


@dataclass(frozen=True)
class ElementGeometry:
    """P1 gradients (rows, one per local vertex) and volume of one tetrahedron."""

    basis_gradients: np.ndarray
    volume: float


class BackgroundMesh:
    """Tetrahedral mesh with lazily computed geometry and adjacency.

    Parameters
    ----------
    nodes : array_like, shape (N, 3)
        Node coordinates.
    tets : array_like, shape (T, 4)
        Node indices of every tetrahedron, positively oriented.
    domain : BoxDomain, optional
        The box the mesh was generated from.

    Notes
    -----
    Arrays are made read-only; the mesh is immutable after construction.
    """

    def __init__(self, nodes, tets, domain=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.tets = np.ascontiguousarray(tets, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise MeshError("nodes must have shape (N, 3)")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise MeshError("tets must have shape (T, 4)")
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= len(self.nodes)):
            raise MeshError("tet node index out of range")
        self.nodes.flags.writeable = False
        self.tets.flags.writeable = False
        self.domain = domain

    def __repr__(self):
        return f"BackgroundMesh(n_nodes={self.n_nodes}, n_tets={self.n_tets}, h={self.h:.4g})"

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_tets(self):
        return len(self.tets)

    @cached_property
    def h(self):
        """Maximum edge length."""
        x = self.nodes[self.tets]
        best = 0.0
        for a, b in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
            best = max(best, float(np.max(np.linalg.norm(x[:, a] - x[:, b], axis=1))))
        return best

    @cached_property
    def _geometry(self):
        x = self.nodes[self.tets]
        jac = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=2)
        det = np.linalg.det(jac)
        vol = det / 6.0
        tol = 1e-12 * self.h ** 3
        bad = np.flatnonzero(vol <= tol)
        if bad.size:
            raise MeshError(f"{bad.size} degenerate or inverted tets, first is {bad[0]}")
        # rows of inv(jac) are the gradients of the barycentrics 1..3
        inv = np.linalg.inv(jac)
        grads = np.empty((len(x), 4, 3))
        grads[:, 1:] = inv
        grads[:, 0] = -inv.sum(axis=1)
        grads.flags.writeable = False
        vol.flags.writeable = False
        return grads, vol

    @property
    def gradients(self):
        """P1 basis gradients, shape (T, 4, 3)."""
        return self._geometry[0]

    @property
    def volumes(self):
        return self._geometry[1]

    @cached_property
    def faces(self):
        return build_face_adjacency(self)

    @cached_property
    def node_elements(self):
        """Sparse (N, T) incidence matrix, 1 where a node belongs to a tet."""
        from scipy import sparse

        T = self.n_tets
        rows = self.tets.ravel()
        cols = np.repeat(np.arange(T), 4)
        return sparse.csr_matrix(
            (np.ones(4 * T, dtype=np.int8), (rows, cols)), shape=(self.n_nodes, T)
        )

    def barycentric(self, elements, points):
        """Barycentric coordinates of ``points[i]`` in tet ``elements[i]``."""
        elements = np.asarray(elements)
        g = self.gradients[elements]
        x = self.nodes[self.tets[elements]]
        return 1.0 + np.einsum("tij,tij->ti", g, points[:, None, :] - x)


def _kuhn_local_tets():
    """Six tets of the unit cube as corner indices ``ix + 2 iy + 4 iz``."""
    local = []
    for perm in permutations(range(3)):
        corner = np.zeros(3, dtype=int)
        verts = [corner.copy()]
        for axis in perm:
            corner[axis] += 1
            verts.append(corner.copy())
        verts = np.array(verts)
        vol = np.linalg.det((verts[1:] - verts[0]).T)
        if vol < 0:
            verts[[2, 3]] = verts[[3, 2]]
        local.append(verts @ np.array([1, 2, 4]))
    return np.array(local)


def build_box_mesh(domain):
    """Structured 6-tet-per-cell mesh of a box.

    Nodes are numbered with x fastest, then y, then z; tets are numbered
    cell by cell (same order) with the six Kuhn tets of a cell consecutive.

    Parameters
    ----------
    domain : BoxDomain

    Returns
    -------
    BackgroundMesh
    """
    nx, ny, nz = domain.divisions
    axes = [np.linspace(lo, hi, n + 1) for lo, hi, n in zip(domain.lo, domain.hi, domain.divisions)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    corners = np.stack(
        [nid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)], axis=1
    )
    local = _kuhn_local_tets()
    tets = corners[:, local].reshape(-1, 4)
    return BackgroundMesh(nodes, tets, domain=domain)


def build_face_adjacency(mesh):
    """Enumerate unique faces and their one or two incident tets.

    Raises
    ------
    MeshError
        If a face is shared by more than two tets.
    """
    T = mesh.n_tets
    N = mesh.n_nodes
    tri = np.sort(mesh.tets[:, _FACE_LOCAL].reshape(-1, 3), axis=1)
    key = (tri[:, 0] * N + tri[:, 1]) * N + tri[:, 2]
    uniq, first, inverse, counts = np.unique(
        key, return_index=True, return_inverse=True, return_counts=True
    )
    if counts.size and counts.max() > 2:
        raise MeshError(f"non-manifold face shared by {counts.max()} tets")
    owner = np.repeat(np.arange(T), 4)
    # stable sort keeps the lower element first within each face
    order = np.argsort(inverse, kind="stable")
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    left = owner[order[start]]
    right = np.full(len(uniq), -1, dtype=np.int64)
    two = counts == 2
    right[two] = owner[order[start[two] + 1]]
    return FaceAdjacency(
        nodes=tri[first],
        left=left,
        right=right,
        element_faces=inverse.reshape(T, 4),
    )


def element_geometry(mesh, element):
    """Basis gradients and volume of a single element.

    Raises
    ------
    MeshError
        For a degenerate tet (volume below ``1e-12 h^3``).
    """
    return ElementGeometry(
        basis_gradients=mesh.gradients[element].copy(), volume=float(mesh.volumes[element])
    )


def write_mesh_vtk(mesh, path, point_data=None):
    """Dump the tet mesh as a legacy ASCII VTK unstructured grid (debugging aid)."""
    lines = [
        "# vtk DataFile Version 3.0",
        "background mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.nodes]
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines += ["4 %d %d %d %d" % tuple(t) for t in mesh.tets]
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines += ["10"] * mesh.n_tets
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in np.asarray(values, dtype=float)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
