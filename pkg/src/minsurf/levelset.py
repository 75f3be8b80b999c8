"""Nodal signed-distance level sets: initialisation, banding, normals,
advection and reinitialisation."""

from dataclasses import dataclass, field

import numpy as np

from .closest import NodeProjector, nearest_on_surface
from .errors import EmptyBandError, LevelSetError

__all__ = [
    "Sphere",
    "Cylinder",
    "Plane",
    "Translated",
    "Union",
    "LevelSet",
    "Band",
    "NormalField",
    "project_normal_speed",
    "init_from_primitive",
    "apply_zero_perturbation",
    "select_band",
    "element_gradient",
    "element_gradients",
    "build_normal_field",
    "extend_from_surface",
    "advance",
    "reinitialize",
    "PERTURBATION",
]

PERTURBATION = 1e-8


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("direction must be nonzero")
    return v / n


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def distance(self, x):
        return np.linalg.norm(np.asarray(x) - np.asarray(self.center, dtype=float), axis=-1) - self.radius


@dataclass(frozen=True)
class Cylinder:
    """Infinite circular cylinder around the line ``point + s * direction``."""

    point: tuple
    direction: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "direction", tuple(_unit(self.direction)))

    def distance(self, x):
        r = np.asarray(x) - np.asarray(self.point, dtype=float)
        d = np.asarray(self.direction)
        radial = r - (r @ d)[..., None] * d
        return np.linalg.norm(radial, axis=-1) - self.radius


@dataclass(frozen=True)
class Plane:
    """Half-space boundary; ``normal`` points to the positive side."""

    point: tuple
    normal: tuple

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(_unit(self.normal)))

    def distance(self, x):
        return (np.asarray(x) - np.asarray(self.point, dtype=float)) @ np.asarray(self.normal)


@dataclass(frozen=True)
class Translated:
    shape: object
    offset: tuple

    def distance(self, x):
        return self.shape.distance(np.asarray(x) - np.asarray(self.offset, dtype=float))


@dataclass(frozen=True)
class Union:
    """Union of the negative regions; exact distance outside, a bound inside."""

    shapes: tuple

    def distance(self, x):
        return np.min([s.distance(x) for s in self.shapes], axis=0)


@dataclass
class LevelSet:
    """Nodal values of a level set on a background mesh."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError("one value per mesh node required")
        if not np.all(np.isfinite(self.values)):
            raise LevelSetError("non-finite level set values")

    def copy(self):
        return LevelSet(self.mesh, self.values.copy())


@dataclass(frozen=True)
class Band:
    """Cut elements, their neighbour rings and the union of their nodes.

    ``active_nodes`` are the nodes of cut elements; they carry the trace
    finite element unknowns. The remaining band nodes belong to halo
    elements only.
    """

    cut_elements: np.ndarray
    halo_elements: np.ndarray
    nodes: np.ndarray
    ring_count: int
    active_nodes: np.ndarray = field(default=None)

    @property
    def elements(self):
        return np.union1d(self.cut_elements, self.halo_elements)

    @property
    def active_mask(self):
        """Boolean mask over ``nodes`` marking the active ones."""
        return np.isin(self.nodes, self.active_nodes)


@dataclass(frozen=True)
class NormalField:
    """Unit normals per cut element and per band node (aligned with ``band.nodes``)."""

    element_normals: np.ndarray
    nodal_normals: np.ndarray
    coherence: np.ndarray | None = None


def init_from_primitive(mesh, shape):
    """Sample the exact signed distance of ``shape`` at every mesh node."""
    return LevelSet(mesh, shape.distance(mesh.nodes))


def apply_zero_perturbation(ls, delta=PERTURBATION):
    """Push nodal values with ``|phi| < delta h`` away from zero, keeping sign.

    Exact zeros go to ``+delta h``. This guarantees every edge crossing is
    strictly interior to its edge.
    """
    eps = delta * ls.mesh.h
    v = ls.values.copy()
    small = np.abs(v) < eps
    v[small] = np.where(v[small] < 0, -eps, eps)
    return LevelSet(ls.mesh, v)


def _cut_mask(mesh, values):
    p = values[mesh.tets]
    return ~(np.all(p > 0, axis=1) | np.all(p < 0, axis=1))


def select_band(ls, ring_count=2):
    """Cut elements plus ``ring_count`` rings of node-sharing neighbours.

    Raises
    ------
    EmptyBandError
        If no element is cut.
    """
    mesh = ls.mesh
    cut = np.flatnonzero(_cut_mask(mesh, ls.values))
    if cut.size == 0:
        raise EmptyBandError("no element is cut by the zero level set")
    inc = mesh.node_elements
    in_band = np.zeros(mesh.n_tets, dtype=bool)
    in_band[cut] = True
    node_mask = np.zeros(mesh.n_nodes, dtype=bool)
    node_mask[mesh.tets[cut].ravel()] = True
    active = np.flatnonzero(node_mask)
    for _ in range(int(ring_count)):
        touching = (inc.T @ node_mask.astype(np.int8)) > 0
        in_band |= touching
        node_mask[mesh.tets[in_band].ravel()] = True
    halo = np.flatnonzero(in_band)
    halo = np.setdiff1d(halo, cut, assume_unique=True)
    return Band(
        cut_elements=cut,
        halo_elements=halo,
        nodes=np.flatnonzero(node_mask),
        ring_count=int(ring_count),
        active_nodes=active,
    )


def element_gradients(ls, elements):
    """Constant gradients of the P1 interpolant, shape (len(elements), 3)."""
    elements = np.asarray(elements)
    mesh = ls.mesh
    return np.einsum("tij,ti->tj", mesh.gradients[elements], ls.values[mesh.tets[elements]])


def element_gradient(ls, element):
    return element_gradients(ls, [element])[0]


def extend_from_surface(surface, vertex_values, points, mode="triangle"):
    """Closest-point extension of surface vertex data to arbitrary points."""
    _, tri, bary = nearest_on_surface(surface.vertices, surface.triangles, points, mode=mode)
    vals = np.asarray(vertex_values)[surface.triangles[tri]]
    return np.einsum("nk,nk...->n...", bary, vals)


def build_normal_field(ls, band, surface, projector=None):
    """Element normals on cut elements and L2-projected nodal normals.

    The nodal normal of an active node is the lumped L2 projection of the
    piecewise constant element normal over the discrete surface (3-point
    edge-midpoint rule), renormalised. Halo nodes receive the normal at
    their closest surface point.

    Parameters
    ----------
    ls : LevelSet
    band : Band
    surface : SurfaceMesh
        Zero set of ``ls`` on the band's cut elements.
    projector : NodeProjector, optional
        Shared closest-point cache for ``surface``.

    Raises
    ------
    LevelSetError
        If a cut element has a vanishing gradient.
    """
    mesh = ls.mesh
    grads = element_gradients(ls, band.cut_elements)
    norms = np.linalg.norm(grads, axis=1)
    if np.any(norms == 0):
        bad = band.cut_elements[norms == 0][0]
        raise LevelSetError(f"zero level set gradient on cut element {bad}")
    elem_n = grads / norms[:, None]

    if surface.n_triangles == 0:
        raise LevelSetError("empty surface, cannot project normals")
    pos = np.searchsorted(band.cut_elements, surface.parent)
    tri_n = elem_n[pos]
    weights = _midpoint_shape_weights(mesh, surface)  # (T, 4)
    acc = np.zeros((mesh.n_nodes, 3))
    wsum = np.zeros(mesh.n_nodes)
    tnodes = mesh.tets[surface.parent]
    np.add.at(acc, tnodes.ravel(), (weights[:, :, None] * tri_n[:, None, :]).reshape(-1, 3))
    np.add.at(wsum, tnodes.ravel(), weights.ravel())

    nodal = np.zeros((len(band.nodes), 3))
    coherence = np.ones(len(band.nodes))
    nodes = band.nodes
    has = wsum[nodes] > 0
    v = acc[nodes[has]] / wsum[nodes[has], None]
    length = np.linalg.norm(v, axis=1)
    ok = length > 1e-12
    idx = np.flatnonzero(has)
    coherence[idx] = length
    nodal[idx[ok]] = v[ok] / length[ok, None]
    missing = np.ones(len(nodes), dtype=bool)
    missing[idx[ok]] = False
    if missing.any():
        projector = projector or NodeProjector(surface, mesh.nodes)
        ext = projector.extend(_vertex_normals(surface), nodes[missing])
        nodal[missing] = ext / np.linalg.norm(ext, axis=1)[:, None]
    return NormalField(element_normals=elem_n, nodal_normals=nodal, coherence=coherence)


def project_normal_speed(mesh, band, surface, normals, velocity):
    """Lumped L2 projection of the scalar normal speed ``n_T . u_h``.

    Unlike ``n_i . u_i`` this stays meaningful at nodes whose surrounding
    surface normals cancel, such as the centre of a sub-cell droplet.

    Parameters
    ----------
    mesh : BackgroundMesh
    band : Band
    surface : SurfaceMesh
    normals : NormalField
    velocity : ndarray, shape (len(band.nodes), 3)

    Returns
    -------
    ndarray, shape (len(band.nodes),)
        Zero at nodes carrying no surface weight.
    """
    full = np.zeros((mesh.n_nodes, 3))
    full[band.nodes] = velocity
    u_tri = surface.interpolate(full)[surface.triangles].mean(axis=1)
    tri_n = normals.element_normals[np.searchsorted(band.cut_elements, surface.parent)]
    v_tri = np.einsum("ij,ij->i", tri_n, u_tri)
    weights = _midpoint_shape_weights(mesh, surface)
    tnodes = mesh.tets[surface.parent].ravel()
    acc = np.bincount(tnodes, (weights * v_tri[:, None]).ravel(), mesh.n_nodes)
    wsum = np.bincount(tnodes, weights.ravel(), mesh.n_nodes)
    out = np.zeros(len(band.nodes))
    has = wsum[band.nodes] > 0
    out[has] = acc[band.nodes[has]] / wsum[band.nodes[has]]
    return out


def _midpoint_shape_weights(mesh, surface):
    """``area/3 * sum_q psi_i(m_q)`` per triangle and parent-local node."""
    tv = surface.vertices[surface.triangles]
    mids = 0.5 * (tv + tv[:, [1, 2, 0]])
    w = np.zeros((surface.n_triangles, 4))
    for q in range(3):
        w += mesh.barycentric(surface.parent, mids[:, q])
    return w * (surface.areas / 3.0)[:, None]


def _vertex_normals(surface):
    acc = np.zeros((surface.n_vertices, 3))
    np.add.at(acc, surface.triangles.ravel(), np.repeat(surface.normals * surface.areas[:, None], 3, axis=0))
    length = np.linalg.norm(acc, axis=1)
    length[length == 0] = 1.0
    return acc / length[:, None]


def advance(ls, band, normals, velocity, k, speed=None):
    """Explicit level set update ``phi <- phi - k n.u`` on band nodes.

    ``speed`` overrides the nodal ``n.u`` when given.
    """
    if k <= 0:
        raise ValueError("time step must be positive")
    if speed is None:
        speed = np.einsum("ij,ij->i", normals.nodal_normals, velocity)
    v = ls.values.copy()
    v[band.nodes] -= k * speed
    return LevelSet(ls.mesh, v)


def reinitialize(ls, band, surface, mode="triangle", fixed=None, nodes=None):
    """Replace band values by the signed distance to ``surface``.

    Parameters
    ----------
    ls : LevelSet
    band : Band
        Band whose nodes are redistanced; ``ring_count`` sets the far-field
        clamp magnitude ``(ring_count + 1) h``.
    surface : SurfaceMesh
        Discrete zero set of ``ls``.
    mode : {"triangle", "vertex", "interface"}
        Distance to the nearest point of the triangulation, or to the
        nearest surface vertex. ``"interface"`` divides the values at nodes
        of elements carrying surface triangles by the local gradient
        magnitude (area-weighted over those elements) and uses triangle
        distances elsewhere; it leaves the discrete zero set nearly in place
        instead of moving it by the chord error on every call.
    fixed : array_like of bool, optional
        Node mask of values that are never modified.
    nodes : array_like, optional
        Override of the node set to redistance (defaults to ``band.nodes``).

    Raises
    ------
    LevelSetError
        If the surface is empty.
    """
    if surface.n_triangles == 0:
        raise LevelSetError("cannot reinitialize from an empty surface")
    mesh = ls.mesh
    old = ls.values
    nodes = band.nodes if nodes is None else np.asarray(nodes)
    if fixed is not None:
        nodes = nodes[~np.asarray(fixed)[nodes]]
    new = old.copy()
    far = np.ones(mesh.n_nodes, dtype=bool)
    far[nodes] = False
    if mode == "interface":
        scaled, nodes = _rescale_cut_nodes(ls, surface, nodes)
        new[scaled[0]] = scaled[1]
        mode = "triangle"
    dist, _, _ = nearest_on_surface(surface.vertices, surface.triangles, mesh.nodes[nodes], mode=mode)
    # floor keeps the sign strict for nodes sitting on the surface
    dist = np.maximum(dist, PERTURBATION * mesh.h)
    new[nodes] = np.where(old[nodes] < 0, -dist, dist)

    if fixed is not None:
        far &= ~np.asarray(fixed)
    cap = (band.ring_count + 1) * mesh.h
    lift = far & (np.abs(old) < cap)
    new[lift] = np.where(old[lift] < 0, -cap, cap)
    return LevelSet(mesh, new)


def _rescale_cut_nodes(ls, surface, nodes):
    """Split ``nodes`` into those of surface-carrying elements (rescaled) and the rest."""
    mesh = ls.mesh
    elems, inv = np.unique(surface.parent, return_inverse=True)
    w = np.bincount(inv, weights=surface.areas)
    g = np.linalg.norm(element_gradients(ls, elems), axis=1)
    tn = mesh.tets[elems]
    num = np.zeros(mesh.n_nodes)
    den = np.zeros(mesh.n_nodes)
    np.add.at(num, tn.ravel(), np.repeat(w * g, 4))
    np.add.at(den, tn.ravel(), np.repeat(w, 4))
    on = np.zeros(mesh.n_nodes, dtype=bool)
    on[nodes] = True
    on &= den > 0
    idx = np.flatnonzero(on)
    vals = ls.values[idx] * den[idx] / num[idx]
    rest = nodes[~on[nodes]]
    return (idx, vals), rest
