"""Trace finite element operators on the band nodes.

All operators are scalar; the three coordinate components share them.
Rows and columns are indexed by position in ``band.nodes``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import AssemblyError

__all__ = [
    "DofMap",
    "ZPlane",
    "build_dof_map",
    "projection_matrices",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_stabilization",
    "apply_clamp",
    "ConstrainedOperator",
    "dump_operator",
]


@dataclass(frozen=True)
class ZPlane:
    """Clamp predicate: nodes with ``|z - z0| < tol``."""

    z: float
    tol: float = 1e-9

    def __call__(self, coords):
        return np.abs(coords[:, 2] - self.z) < self.tol

    def distance(self, points):
        return np.abs(np.asarray(points)[:, 2] - self.z)


@dataclass(frozen=True)
class DofMap:
    """Compact numbering of the band nodes.

    Attributes
    ----------
    nodes : ndarray
        Mesh node of each dof (sorted).
    clamped : ndarray of bool
        Dofs with prescribed zero velocity.
    active : ndarray of bool
        Dofs belonging to at least one cut element.
    slip : ndarray of bool, shape (n_dofs, 3), optional
        Velocity components fixed to zero because the dof lies on a box
        face with that normal direction.
    """

    nodes: np.ndarray
    clamped: np.ndarray
    active: np.ndarray
    slip: np.ndarray = None

    @property
    def n_dofs(self):
        return len(self.nodes)

    def dof_of(self, mesh_nodes):
        """Dof index of each mesh node; raises for nodes outside the band."""
        mesh_nodes = np.asarray(mesh_nodes)
        pos = np.searchsorted(self.nodes, mesh_nodes)
        pos = np.minimum(pos, len(self.nodes) - 1)
        if not np.all(self.nodes[pos] == mesh_nodes):
            raise AssemblyError("mesh node outside the band")
        return pos

    @property
    def free(self):
        """Dofs solved for: active and not clamped."""
        return self.active & ~self.clamped

    @property
    def free_components(self):
        """(n_dofs, 3) mask of the velocity components solved for."""
        keep = np.repeat(self.free[:, None], 3, axis=1)
        if self.slip is not None:
            keep &= ~self.slip
        return keep


def build_dof_map(band, coords, clamps=(), walls=None):
    """Number the band nodes and flag clamped ones.

    Parameters
    ----------
    band : Band
    coords : ndarray, shape (N, 3)
        Mesh node coordinates.
    clamps : iterable of callables
        Each maps an (n, 3) coordinate array to a boolean mask.
    walls : (lo, hi), optional
        Box corners. A dof on the face ``x_d = lo_d`` or ``x_d = hi_d`` gets
        its ``d``-th velocity component fixed to zero, so the surface may
        slide along the walls but not leave the box.
    """
    nodes = band.nodes
    x = coords[nodes]
    clamped = np.zeros(len(nodes), dtype=bool)
    for pred in clamps:
        clamped |= np.asarray(pred(x), dtype=bool)
    slip = None
    if walls is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in walls)
        tol = 1e-9 * np.max(hi - lo)
        slip = (np.abs(x - lo) < tol) | (np.abs(x - hi) < tol)
    return DofMap(nodes=nodes, clamped=clamped, active=band.active_mask, slip=slip)


def projection_matrices(normals):
    """Tangential projectors ``I - n n^T``, shape (n, 3, 3)."""
    normals = np.asarray(normals)
    return np.eye(3) - normals[:, :, None] * normals[:, None, :]


def _local_dofs(surface, mesh, dofs):
    return dofs.dof_of(mesh.tets[surface.parent])


def _scatter(rows, vals, n):
    """Assemble (n_local x n_local) blocks given per-element dof rows."""
    k = rows.shape[1]
    r = np.repeat(rows, k, axis=1).ravel()
    c = np.tile(rows, (1, k)).ravel()
    return sparse.csr_matrix((vals.ravel(), (r, c)), shape=(n, n))


def assemble_mass(surface, mesh, dofs):
    """Surface mass matrix ``M_ij = (psi_i, psi_j)_{Gamma_h}``.

    Uses the edge-midpoint rule on each triangle, exact for the quadratic
    products of the parent tet's linear shape functions.
    """
    try:
        rows = _local_dofs(surface, mesh, dofs)
    except AssemblyError as exc:
        raise AssemblyError("surface triangle with parent element outside the band") from exc
    tv = surface.vertices[surface.triangles]
    mids = 0.5 * (tv + tv[:, [1, 2, 0]])
    local = np.zeros((surface.n_triangles, 4, 4))
    for q in range(3):
        psi = mesh.barycentric(surface.parent, mids[:, q])
        local += psi[:, :, None] * psi[:, None, :]
    local *= (surface.areas / 3.0)[:, None, None]
    return _scatter(rows, local, dofs.n_dofs)


def assemble_stiffness(surface, mesh, dofs):
    """Laplace-Beltrami stiffness ``S_ij = (P grad psi_i, P grad psi_j)_{Gamma_h}``.

    ``P`` is built from the triangle normal, which for a P1 level set is
    parallel to the parent element's gradient.
    """
    try:
        rows = _local_dofs(surface, mesh, dofs)
    except AssemblyError as exc:
        raise AssemblyError("surface triangle with parent element outside the band") from exc
    g = mesh.gradients[surface.parent]  # (T, 4, 3)
    n = surface.normals
    gt = g - np.einsum("tij,tj->ti", g, n)[:, :, None] * n[:, None, :]
    local = np.einsum("tik,tjk->tij", gt, gt) * surface.areas[:, None, None]
    return _scatter(rows, local, dofs.n_dofs)


def assemble_stabilization(band, mesh, dofs, scale=1.0, h_power=0):
    """Face-jump stabilization over internal faces shared by two cut elements.

    For a face ``F`` between ``K1`` and ``K2`` with outward unit normal
    ``n1`` w.r.t. ``K1``, the jump of basis function ``i`` is
    ``n1 . (grad psi_i|K1 - grad psi_i|K2)`` and the contribution is
    ``scale * h**h_power * |F| * jump_i * jump_j``.
    """
    n = dofs.n_dofs
    if scale == 0:
        return sparse.csr_matrix((n, n))
    faces = mesh.faces
    is_cut = np.zeros(mesh.n_tets, dtype=bool)
    is_cut[band.cut_elements] = True
    sel = np.flatnonzero((faces.right >= 0) & is_cut[faces.left] & is_cut[np.maximum(faces.right, 0)])
    if sel.size == 0:
        return sparse.csr_matrix((n, n))
    k1 = faces.left[sel]
    k2 = faces.right[sel]
    fn = faces.nodes[sel]
    x = mesh.nodes
    cross = np.cross(x[fn[:, 1]] - x[fn[:, 0]], x[fn[:, 2]] - x[fn[:, 0]])
    twice = np.linalg.norm(cross, axis=1)
    area = 0.5 * twice
    nrm = cross / twice[:, None]

    t1 = mesh.tets[k1]
    t2 = mesh.tets[k2]
    opp1 = _opposite(t1, fn)
    opp2 = _opposite(t2, fn)
    # orient the normal outward from K1
    flip = np.einsum("ij,ij->i", nrm, x[opp1] - x[fn[:, 0]]) > 0
    nrm[flip] *= -1

    local_nodes = np.column_stack([fn, opp1, opp2])  # (F, 5)
    g1 = _grads_for(mesh, k1, t1, local_nodes)
    g2 = _grads_for(mesh, k2, t2, local_nodes)
    jump = np.einsum("fik,fk->fi", g1 - g2, nrm)
    coef = scale * mesh.h ** h_power * area
    local = coef[:, None, None] * jump[:, :, None] * jump[:, None, :]
    rows = dofs.dof_of(local_nodes)
    return _scatter(rows, local, n)


def _opposite(tets, face_nodes):
    """Node of each tet not on the given face."""
    on = (tets[:, :, None] == face_nodes[:, None, :]).any(axis=2)
    return tets[~on]


def _grads_for(mesh, elems, tets, nodes):
    """Gradient of each node's basis function on ``elems`` (zero if not a vertex)."""
    match = tets[:, None, :] == nodes[:, :, None]  # (F, 5, 4)
    g = mesh.gradients[elems]  # (F, 4, 3)
    return np.einsum("fnl,flk->fnk", match.astype(float), g)


def apply_clamp(A, dofs, rhs=None, keep=None):
    """Symmetric elimination of constrained dofs.

    Rows and columns of every dof outside ``keep`` (default: the free dofs)
    are zeroed and the diagonal set to one; matching RHS entries are zeroed.

    Returns
    -------
    A : csr_matrix
    rhs : ndarray or None
    """
    keep = dofs.free if keep is None else keep
    d = sparse.diags(keep.astype(float))
    A = (d @ A @ d + sparse.diags((~keep).astype(float))).tocsr()
    if rhs is not None:
        rhs = np.where(keep[:, None] if np.ndim(rhs) == 2 else keep, rhs, 0.0)
    return A, rhs


class ConstrainedOperator:
    """``A`` with a separate symmetric elimination for each block column.

    Applied to an (n, m) block ``X``, column ``c`` sees the matrix whose
    rows and columns outside ``keep[:, c]`` are replaced by the identity.
    Supports the ``@`` product and ``diagonal()`` used by :func:`pcg`.
    """

    def __init__(self, A, keep):
        self.A = sparse.csr_matrix(A)
        self.keep = np.asarray(keep, dtype=bool)
        self.shape = self.A.shape

    def diagonal(self):
        return np.where(self.keep, self.A.diagonal()[:, None], 1.0)

    def __matmul__(self, X):
        return np.where(self.keep, self.A @ np.where(self.keep, X, 0.0), X)


def dump_operator(A, path):
    """Plain text dump: dof count, then one ``row col value`` triplet per line."""
    A = sparse.coo_matrix(A)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{A.shape[0]}\n")
        for r, c, v in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {v:.17g}\n")
