"""Marching-tetrahedra extraction of the discrete zero isosurface."""

from dataclasses import dataclass

import numpy as np

from .errors import LevelSetError

__all__ = ["SurfaceMesh", "extract", "total_area", "min_radial_distance"]

_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def _case_tables():
    tri_cases = {}
    quad_cases = {}
    for mask in range(1, 15):
        neg = [i for i in range(4) if mask >> i & 1]
        pos = [i for i in range(4) if not mask >> i & 1]
        if len(neg) in (1, 3):
            lone = neg[0] if len(neg) == 1 else pos[0]
            others = [j for j in range(4) if j != lone]
            tri_cases[mask] = [(lone, j) for j in others]
        else:
            i, j = neg
            k, l = pos
            quad_cases[mask] = [(i, k), (i, l), (j, l), (j, k)]
    return tri_cases, quad_cases


_TRI_CASES, _QUAD_CASES = _case_tables()


@dataclass(frozen=True)
class SurfaceMesh:
    """Piecewise planar surface, one polygon per cut tet.

    Attributes
    ----------
    vertices : ndarray, shape (V, 3)
    edges : ndarray, shape (V, 2)
        Background edge ``(a, b)`` with ``a < b`` that each vertex lies on.
    theta : ndarray, shape (V,)
        Position along the edge: ``x = (1 - theta) x_a + theta x_b``.
    triangles : ndarray, shape (T, 3)
    parent : ndarray, shape (T,)
        Background element each triangle was cut from.
    areas, normals : ndarray
        Triangle areas and unit normals (pointing along the level set gradient).
    dropped : int
        Number of sliver triangles discarded for being below the area threshold.
    """

    vertices: np.ndarray
    edges: np.ndarray
    theta: np.ndarray
    triangles: np.ndarray
    parent: np.ndarray
    areas: np.ndarray
    normals: np.ndarray
    dropped: int = 0

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def interpolate(self, nodal):
        """Evaluate a field given at background nodes at the surface vertices."""
        nodal = np.asarray(nodal)
        t = self.theta.reshape((-1,) + (1,) * (nodal.ndim - 1))
        return (1.0 - t) * nodal[self.edges[:, 0]] + t * nodal[self.edges[:, 1]]


def _empty_surface():
    return SurfaceMesh(
        vertices=np.zeros((0, 3)),
        edges=np.zeros((0, 2), dtype=np.int64),
        theta=np.zeros(0),
        triangles=np.zeros((0, 3), dtype=np.int64),
        parent=np.zeros(0, dtype=np.int64),
        areas=np.zeros(0),
        normals=np.zeros((0, 3)),
    )


def extract(ls, band=None, elements=None):
    """Extract the zero isosurface of a P1 level set on the cut elements.

    Parameters
    ----------
    ls : LevelSet
        Perturbed level set (no exact nodal zeros).
    band : Band, optional
        If given, only its cut elements are visited.
    elements : array_like, optional
        Explicit element list; overrides ``band``.

    Returns
    -------
    SurfaceMesh
        Shared-vertex triangulation; vertices are sorted by edge key,
        triangles by parent element.
    """
    mesh = ls.mesh
    phi = ls.values
    if elements is None:
        elements = band.cut_elements if band is not None else np.arange(mesh.n_tets)
    elements = np.asarray(elements, dtype=np.int64)
    if np.any(phi[mesh.tets[elements]] == 0.0):
        raise LevelSetError("exact nodal zero on a cut element; perturb the level set first")
    tets = mesh.tets[elements]
    neg = phi[tets] < 0
    mask = neg @ np.array([1, 2, 4, 8])
    cut = (mask > 0) & (mask < 15)
    elements, tets, mask = elements[cut], tets[cut], mask[cut]
    if elements.size == 0:
        return _empty_surface()

    N = mesh.n_nodes
    polys = []  # (element position, local slot, list of global edge node pairs)
    for table, nv in ((_TRI_CASES, 3), (_QUAD_CASES, 4)):
        lut = np.full((16, nv, 2), -1)
        for m, edges in table.items():
            lut[m] = edges
        sel = np.flatnonzero(lut[mask, 0, 0] >= 0)
        loc = lut[mask[sel]]  # (n, nv, 2) local vertex pairs
        ga = np.take_along_axis(tets[sel], loc[..., 0], axis=1)
        gb = np.take_along_axis(tets[sel], loc[..., 1], axis=1)
        polys.append((sel, np.minimum(ga, gb), np.maximum(ga, gb)))

    keys = np.concatenate([(a * N + b).ravel() for _, a, b in polys])
    ukeys, inv = np.unique(keys, return_inverse=True)
    ea, eb = ukeys // N, ukeys % N
    pa, pb = phi[ea], phi[eb]
    theta = pa / (pa - pb)
    verts = (1.0 - theta)[:, None] * mesh.nodes[ea] + theta[:, None] * mesh.nodes[eb]

    n_tri = polys[0][1].size
    tri_v = inv[:n_tri].reshape(-1, 3)
    quad_v = inv[n_tri:].reshape(-1, 4)

    # split quads along the shorter diagonal, ties to the lower index pair
    q = verts[quad_v]
    d02 = np.linalg.norm(q[:, 0] - q[:, 2], axis=1)
    d13 = np.linalg.norm(q[:, 1] - q[:, 3], axis=1)
    pair02 = np.sort(quad_v[:, [0, 2]], axis=1)
    pair13 = np.sort(quad_v[:, [1, 3]], axis=1)
    lex02 = (pair02[:, 0] < pair13[:, 0]) | (
        (pair02[:, 0] == pair13[:, 0]) & (pair02[:, 1] < pair13[:, 1])
    )
    use02 = (d02 < d13) | ((d02 == d13) & lex02)
    first = np.where(use02[:, None], quad_v[:, [0, 1, 2]], quad_v[:, [1, 2, 3]])
    second = np.where(use02[:, None], quad_v[:, [0, 2, 3]], quad_v[:, [1, 3, 0]])

    tri_sel, quad_sel = polys[0][0], polys[1][0]
    triangles = np.concatenate([tri_v, first, second])
    owner = np.concatenate([tri_sel, quad_sel, quad_sel])
    slot = np.concatenate(
        [np.zeros(len(tri_sel), int), np.zeros(len(quad_sel), int), np.ones(len(quad_sel), int)]
    )
    order = np.lexsort((slot, owner))
    triangles, owner = triangles[order], owner[order]
    parent = elements[owner]

    p0, p1, p2 = (verts[triangles[:, i]] for i in range(3))
    cross = np.cross(p1 - p0, p2 - p0)
    grad = np.einsum("tij,ti->tj", mesh.gradients[parent], phi[mesh.tets[parent]])
    flip = np.einsum("ij,ij->i", cross, grad) < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    cross[flip] *= -1
    twice = np.linalg.norm(cross, axis=1)
    areas = 0.5 * twice

    keep = areas > 1e-14 * mesh.h ** 2
    dropped = int(np.count_nonzero(~keep))
    triangles, parent, areas, cross, twice = (
        triangles[keep], parent[keep], areas[keep], cross[keep], twice[keep]
    )
    return SurfaceMesh(
        vertices=verts,
        edges=np.column_stack([ea, eb]),
        theta=theta,
        triangles=triangles,
        parent=parent,
        areas=areas,
        normals=cross / twice[:, None] if len(twice) else np.zeros((0, 3)),
        dropped=dropped,
    )


def total_area(surface):
    return float(np.sum(surface.areas))


def min_radial_distance(surface, axis_point=(0.0, 0.0, 0.0), axis_direction=(0.0, 0.0, 1.0), slab=None):
    """Smallest distance from a surface vertex in ``slab`` to an axis line.

    Parameters
    ----------
    surface : SurfaceMesh
    axis_point, axis_direction : array_like
        The axis line.
    slab : (float, float), optional
        Closed interval of z coordinates; all vertices when omitted.

    Raises
    ------
    LevelSetError
        If no vertex lies in the slab.
    """
    used = np.unique(surface.triangles)
    x = surface.vertices[used]
    if slab is not None:
        lo, hi = slab
        x = x[(x[:, 2] >= lo) & (x[:, 2] <= hi)]
    if len(x) == 0:
        raise LevelSetError(f"no surface vertex in slab {slab}")
    d = np.asarray(axis_direction, dtype=float)
    d = d / np.linalg.norm(d)
    r = x - np.asarray(axis_point, dtype=float)
    radial = r - np.outer(r @ d, d)
    return float(np.min(np.linalg.norm(radial, axis=1)))
