"""Nearest-point queries against a triangle soup."""

import itertools

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["closest_point_on_triangles", "nearest_on_surface", "NodeProjector"]


def _dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def closest_point_on_triangles(p, a, b, c):
    """Closest point on triangle ``(a[i], b[i], c[i])`` to ``p[i]``.

    Vectorised Voronoi-region classification (Ericson, *Real-Time
    Collision Detection*, 5.1.5).

    Returns
    -------
    point : ndarray, shape (n, 3)
    bary : ndarray, shape (n, 3)
        Barycentric weights of the closest point w.r.t. ``a, b, c``.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    bp = p - b
    cp = p - c
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = len(p)
    bary = np.empty((n, 3))
    done = np.zeros(n, dtype=bool)

    def assign(mask, w):
        mask = mask & ~done
        bary[mask] = w[mask] if np.ndim(w) == 2 else w
        done[mask] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), np.array([1.0, 0.0, 0.0]))
        assign((d3 >= 0) & (d4 <= d3), np.array([0.0, 1.0, 0.0]))
        t = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), np.column_stack([1 - t, t, np.zeros(n)]))
        assign((d6 >= 0) & (d5 <= d6), np.array([0.0, 0.0, 1.0]))
        t = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), np.column_stack([1 - t, np.zeros(n), t]))
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign(
            (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
            np.column_stack([np.zeros(n), 1 - t, t]),
        )
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        assign(np.ones(n, dtype=bool), np.column_stack([1 - v - w, v, w]))
    point = bary[:, :1] * a + bary[:, 1:2] * b + bary[:, 2:] * c
    return point, bary


def nearest_on_surface(vertices, triangles, points, mode="triangle", chunk=8192):
    """Distance from each query point to a triangulated surface.

    Parameters
    ----------
    vertices : ndarray, shape (V, 3)
    triangles : ndarray, shape (T, 3)
    points : ndarray, shape (n, 3)
    mode : {"triangle", "vertex"}
        ``"triangle"`` returns the exact distance to the union of the
        triangles; ``"vertex"`` the distance to the nearest vertex.

    Returns
    -------
    dist : ndarray, shape (n,)
    tri : ndarray, shape (n,)
        Index of the triangle holding the closest point (for ``"vertex"``
        mode, any triangle incident to the nearest vertex).
    bary : ndarray, shape (n, 3)
        Barycentric coordinates of the closest point in ``tri``.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    # orphaned vertices (from dropped slivers) must not bound the search
    used = np.unique(triangles)
    dv, iv = cKDTree(vertices[used]).query(points)
    iv = used[iv]
    if mode == "vertex":
        # first triangle incident to each vertex
        flat = triangles.ravel()
        order = np.argsort(flat, kind="stable")
        first = np.full(len(vertices), -1, dtype=np.int64)
        first[flat[order[::-1]]] = order[::-1]
        slot = first[iv]
        tri = slot // 3
        bary = np.zeros((n, 3))
        bary[np.arange(n), slot % 3] = 1.0
        return dv, tri, bary
    if mode != "triangle":
        raise ValueError(f"unknown distance mode {mode!r}")

    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    centroid = (a + b + c) / 3.0
    tri_reach = np.max(np.stack([np.linalg.norm(x - centroid, axis=1) for x in (a, b, c)]), axis=0)
    groups = _reach_groups(centroid, tri_reach)

    dist = np.empty(n)
    tri = np.empty(n, dtype=np.int64)
    bary = np.empty((n, 3))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        bound = dv[lo:hi] * (1 + 1e-12) + 1e-300
        owners, cands = [], []
        for ids, tree, reach in groups:
            hits = tree.query_ball_point(points[lo:hi], bound + reach)
            counts = np.array([len(h) for h in hits], dtype=np.int64)
            cands.append(ids[np.fromiter(itertools.chain.from_iterable(hits), dtype=np.int64, count=counts.sum())])
            owners.append(np.repeat(np.arange(hi - lo), counts))
        owner = np.concatenate(owners)
        cand = np.concatenate(cands)
        order = np.argsort(owner, kind="stable")
        owner, cand = owner[order], cand[order]
        # a triangle can only hold a point within dv if its centroid is
        # within dv plus its own circumradius about the centroid
        gap = np.linalg.norm(points[lo:hi][owner] - centroid[cand], axis=1)
        keep = gap <= bound[owner] + tri_reach[cand]
        d, t, w = _best(points[lo:hi], owner[keep], cand[keep], a, b, c, hi - lo)
        dist[lo:hi], tri[lo:hi], bary[lo:hi] = d, t, w
    return dist, tri, bary


def _reach_groups(centroid, reach, n_groups=4):
    """Centroid trees over triangles binned by size, each with its bin's largest reach.

    Searching each bin with its own reach keeps a few long triangles from
    inflating the search radius for all others.
    """
    order = np.argsort(reach, kind="stable")
    out = []
    for ids in np.array_split(order, n_groups):
        if ids.size:
            ids = np.sort(ids)
            out.append((ids, cKDTree(centroid[ids]), reach[ids].max()))
    return out


def _best(points, owner, cand, a, b, c, n):
    """Closest candidate per query (``owner`` sorted); ties go to the lower triangle index."""
    cp, cb = closest_point_on_triangles(points[owner], a[cand], b[cand], c[cand])
    d = np.linalg.norm(points[owner] - cp, axis=1)
    counts = np.bincount(owner, minlength=n)
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    dmin = np.minimum.reduceat(d, start)
    big = np.iinfo(np.int64).max
    best = np.minimum.reduceat(np.where(d == dmin[owner], cand, big), start)
    pick = np.flatnonzero((cand == best[owner]) & (d == dmin[owner]))
    # one row per owner: the first hit among duplicates of the same triangle
    pick = pick[np.concatenate([[True], owner[pick][1:] != owner[pick][:-1]])]
    return d[pick], cand[pick], cb[pick]


class NodeProjector:
    """Closest surface points of mesh nodes, each node queried at most once.

    Parameters
    ----------
    surface : SurfaceMesh
    coords : ndarray, shape (N, 3)
        Mesh node coordinates.
    """

    def __init__(self, surface, coords):
        self.surface = surface
        self.coords = coords
        self._tri = np.full(len(coords), -1, dtype=np.int64)
        self._bary = np.zeros((len(coords), 3))

    def project(self, nodes):
        """Triangle index and barycentric weights of the closest point per node."""
        nodes = np.asarray(nodes, dtype=np.int64)
        new = np.unique(nodes[self._tri[nodes] < 0])
        if new.size:
            _, t, w = nearest_on_surface(self.surface.vertices, self.surface.triangles, self.coords[new])
            self._tri[new] = t
            self._bary[new] = w
        return self._tri[nodes], self._bary[nodes]

    def extend(self, vertex_values, nodes):
        """Closest-point extension of per-vertex values to ``nodes``."""
        tri, bary = self.project(nodes)
        vals = np.asarray(vertex_values)[self.surface.triangles[tri]]
        return np.einsum("nk,nk...->n...", bary, vals)
