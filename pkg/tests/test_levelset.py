import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minsurf.errors import EmptyBandError, LevelSetError
from minsurf.isosurface import extract
from minsurf.levelset import (
    Band,
    Cylinder,
    LevelSet,
    NormalField,
    Plane,
    Sphere,
    Translated,
    Union,
    advance,
    apply_zero_perturbation,
    build_normal_field,
    element_gradient,
    element_gradients,
    init_from_primitive,
    reinitialize,
    select_band,
)
from minsurf.mesh import BoxDomain, build_box_mesh


def cube(n, lo=0.0, hi=1.0):
    return build_box_mesh(BoxDomain((lo,) * 3, (hi,) * 3, (n,) * 3))


def plane_ls(n=4, z=0.5, scale=1.0):
    mesh = cube(n)
    ls = init_from_primitive(mesh, Plane((0, 0, z), (0, 0, 1)))
    return apply_zero_perturbation(LevelSet(mesh, scale * ls.values))


def sphere_ls(n=24, r=0.3):
    mesh = cube(n, -0.6, 0.6)
    return apply_zero_perturbation(init_from_primitive(mesh, Sphere((0, 0, 0), r)))


# primitives -----------------------------------------------------------------


def test_primitive_examples():
    assert Sphere((0, 0, 0), 0.5).distance(np.array([[1.0, 0, 0]]))[0] == pytest.approx(0.5)
    assert Cylinder((0, 0, 0), (0, 0, 1), 0.5).distance(np.array([[0.3, 0.4, 0.1]]))[0] == pytest.approx(0, abs=1e-15)
    assert Plane((0, 0, 0.5), (0, 0, 1)).distance(np.array([[0.2, 0.9, 0.1]]))[0] == pytest.approx(-0.4)


def test_primitive_composition():
    s = Translated(Sphere((0, 0, 0), 0.2), (1, 0, 0))
    assert s.distance(np.array([[1.0, 0, 0]]))[0] == pytest.approx(-0.2)
    u = Union((Sphere((0, 0, 0), 0.1), Sphere((1, 0, 0), 0.1)))
    assert u.distance(np.array([[0.5, 0, 0]]))[0] == pytest.approx(0.4)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), 0.0)
    with pytest.raises(ValueError):
        Cylinder((0, 0, 0), (0, 0, 0), 1.0)
    # direction is normalised
    c = Cylinder((0, 0, 0), (0, 0, 2), 1.0)
    assert np.linalg.norm(c.direction) == pytest.approx(1.0)


def test_init_is_exact_distance():
    mesh = cube(3)
    ls = init_from_primitive(mesh, Sphere((0.5, 0.5, 0.5), 0.3))
    expected = np.linalg.norm(mesh.nodes - 0.5, axis=1) - 0.3
    np.testing.assert_array_equal(ls.values, expected)


def test_nonfinite_rejected():
    mesh = cube(1)
    v = np.zeros(8)
    v[3] = np.nan
    with pytest.raises(LevelSetError):
        LevelSet(mesh, v)


# perturbation ---------------------------------------------------------------


def test_perturbation_examples():
    mesh = build_box_mesh(BoxDomain((0, 0, 0), (1, 1, 1), (1, 1, 1)))
    h = mesh.h
    v = np.array([0.0, -1e-12 * h, 0.3, -0.3, 1e-9 * h, 0.0, 0.1, 0.2])
    out = apply_zero_perturbation(LevelSet(mesh, v)).values
    assert out[0] == 1e-8 * h
    assert out[1] == -1e-8 * h
    assert out[2] == 0.3
    assert out[3] == -0.3
    assert out[4] == 1e-8 * h


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e-6, 1e-6, allow_nan=False), min_size=8, max_size=8))
def test_perturbation_properties(vals):
    mesh = build_box_mesh(BoxDomain((0, 0, 0), (1, 1, 1), (1, 1, 1)))
    v = np.array(vals)
    out = apply_zero_perturbation(LevelSet(mesh, v)).values
    assert np.all(out != 0)
    assert np.all(np.abs(out) >= 1e-8 * mesh.h)
    nz = v != 0
    assert np.all(np.sign(out[nz]) == np.sign(v[nz]))


# band -----------------------------------------------------------------------


def test_plane_single_cell_all_cut():
    ls = plane_ls(n=1)
    band = select_band(ls, ring_count=0)
    # brute force sign check
    p = ls.values[ls.mesh.tets]
    expected = np.flatnonzero((p.min(axis=1) < 0) & (p.max(axis=1) > 0))
    np.testing.assert_array_equal(band.cut_elements, expected)
    assert len(band.cut_elements) == 6
    assert band.halo_elements.size == 0


def test_sphere_outside_domain_raises():
    mesh = cube(3)
    ls = init_from_primitive(mesh, Sphere((5, 5, 5), 0.5))
    with pytest.raises(EmptyBandError):
        select_band(ls)


def test_band_rings_brute_force():
    ls = sphere_ls(n=10, r=0.3)
    mesh = ls.mesh
    band = select_band(ls, ring_count=2)
    ring = set(band.cut_elements.tolist())
    for _ in range(2):
        nodes = set(mesh.tets[sorted(ring)].ravel().tolist())
        ring = {e for e in range(mesh.n_tets) if nodes & set(mesh.tets[e].tolist())}
    assert set(band.elements.tolist()) == ring
    assert set(band.nodes.tolist()) == set(mesh.tets[sorted(ring)].ravel().tolist())
    np.testing.assert_array_equal(band.active_nodes, np.unique(mesh.tets[band.cut_elements]))
    assert not set(band.cut_elements.tolist()) & set(band.halo_elements.tolist())


def test_band_grows_with_rings():
    ls = sphere_ls(n=10)
    sizes = [len(select_band(ls, r).elements) for r in range(4)]
    assert sizes == sorted(sizes) and len(set(sizes)) == 4


# gradients and normals -----------------------------------------------------


def test_element_gradient_examples():
    ls = plane_ls(n=2)
    g = element_gradients(ls, np.arange(ls.mesh.n_tets))
    np.testing.assert_allclose(g, np.tile([0, 0, 1.0], (ls.mesh.n_tets, 1)), atol=1e-7)
    const = LevelSet(ls.mesh, np.full(ls.mesh.n_nodes, 3.0))
    np.testing.assert_allclose(element_gradient(const, 0), 0, atol=1e-13)


def test_sphere_gradient_far_from_center():
    ls = sphere_ls(n=24)
    mesh = ls.mesh
    cent = mesh.nodes[mesh.tets].mean(axis=1)
    far = np.flatnonzero(np.linalg.norm(cent, axis=1) > 0.3)
    g = element_gradients(ls, far)
    exact = cent[far] / np.linalg.norm(cent[far], axis=1)[:, None]
    assert np.abs(np.linalg.norm(g, axis=1) - 1).max() < mesh.h
    assert np.linalg.norm(g - exact, axis=1).max() < mesh.h / 0.3


def test_plane_normals_exact():
    ls = plane_ls(n=4)
    band = select_band(ls, 2)
    nf = build_normal_field(ls, band, extract(ls, band))
    np.testing.assert_allclose(nf.nodal_normals, np.tile([0, 0, 1.0], (len(band.nodes), 1)), atol=1e-7)
    np.testing.assert_allclose(nf.element_normals, np.tile([0, 0, 1.0], (len(band.cut_elements), 1)), atol=1e-7)


def test_sphere_normals_angle_and_unit_length():
    ls = sphere_ls(n=24, r=0.3)  # h = 0.087 max edge, cell 0.05
    band = select_band(ls, 2)
    nf = build_normal_field(ls, band, extract(ls, band))
    x = ls.mesh.nodes[band.nodes]
    exact = x / np.linalg.norm(x, axis=1)[:, None]
    cosang = np.clip(np.einsum("ij,ij->i", nf.nodal_normals, exact), -1, 1)
    assert np.degrees(np.arccos(cosang)).max() < 10
    assert np.abs(np.linalg.norm(nf.nodal_normals, axis=1) - 1).max() < 1e-12
    assert np.abs(np.linalg.norm(nf.element_normals, axis=1) - 1).max() < 1e-12


def test_zero_gradient_on_cut_element_rejected():
    mesh = cube(1)
    ls = LevelSet(mesh, np.ones(mesh.n_nodes))
    band = Band(np.array([0]), np.array([], dtype=int), np.unique(mesh.tets[0]), 0, np.unique(mesh.tets[0]))
    surface = extract(plane_ls(n=1))
    with pytest.raises(LevelSetError):
        build_normal_field(ls, band, surface)


# advance ---------------------------------------------------------------------


def test_advance_zero_velocity():
    ls = sphere_ls(n=8)
    band = select_band(ls, 1)
    nf = build_normal_field(ls, band, extract(ls, band))
    out = advance(ls, band, nf, np.zeros((len(band.nodes), 3)), 0.01)
    np.testing.assert_array_equal(out.values, ls.values)


def test_advance_inward_motion():
    mesh = cube(16, -1, 1)
    ls = apply_zero_perturbation(init_from_primitive(mesh, Sphere((0, 0, 0), 0.5)))
    band = select_band(ls, 1)
    nf = build_normal_field(ls, band, extract(ls, band))
    out = advance(ls, band, nf, -nf.nodal_normals, 0.01)
    np.testing.assert_allclose(out.values[band.nodes], ls.values[band.nodes] + 0.01, atol=1e-15)
    outside = np.setdiff1d(np.arange(mesh.n_nodes), band.nodes)
    np.testing.assert_array_equal(out.values[outside], ls.values[outside])
    # zero set now close to radius 0.49
    s = extract(out, select_band(out, 0))
    r = np.linalg.norm(s.vertices, axis=1)
    assert abs(r.mean() - 0.49) < 0.01


def test_advance_rejects_nonpositive_step():
    ls = plane_ls(n=1)
    band = select_band(ls, 0)
    nf = NormalField(np.zeros((6, 3)), np.zeros((8, 3)))
    with pytest.raises(ValueError):
        advance(ls, band, nf, np.zeros((8, 3)), 0.0)


# reinitialize ---------------------------------------------------------------


def test_reinit_exact_plane_unchanged():
    # odd division count keeps z = 0.5 off the node planes, so no perturbation applies
    ls = plane_ls(n=3)
    band = select_band(ls, 2)
    out = reinitialize(ls, band, extract(ls, band))
    assert np.abs(out.values[band.nodes] - ls.values[band.nodes]).max() < 1e-10


def test_reinit_scaled_plane_recovers_distance():
    ls = plane_ls(n=3, scale=2.0)
    exact = plane_ls(n=3)
    band = select_band(ls, 2)
    out = reinitialize(ls, band, extract(ls, band))
    assert np.abs(out.values[band.nodes] - exact.values[band.nodes]).max() < 1e-10


@pytest.mark.parametrize("mode", ["triangle", "vertex", "interface"])
def test_reinit_preserves_signs(mode):
    ls = sphere_ls(n=12)
    mesh = ls.mesh
    scaled = LevelSet(mesh, ls.values * (1 + 0.5 * np.sin(7 * mesh.nodes[:, 0])))
    band = select_band(scaled, 2)
    out = reinitialize(scaled, band, extract(scaled, band), mode=mode)
    assert np.all(np.sign(out.values) == np.sign(scaled.values))


def test_reinit_zero_set_preserved_on_plane():
    ls = plane_ls(n=4, z=0.43, scale=3.0)
    band = select_band(ls, 2)
    before = extract(ls, band)
    out = reinitialize(ls, band, before)
    after = extract(out, select_band(out, 2))
    np.testing.assert_array_equal(before.parent, after.parent)
    assert np.abs(before.vertices - after.vertices).max() < 1e-9 * ls.mesh.h


def test_reinit_restores_unit_gradient():
    ls = sphere_ls(n=24, r=0.3)
    mesh = ls.mesh
    distorted = LevelSet(mesh, ls.values * (1 + 0.8 * mesh.nodes[:, 2] ** 2 + 0.3 * mesh.nodes[:, 0]))
    band = select_band(distorted, 2)
    out = reinitialize(distorted, band, extract(distorted, band))
    g = np.linalg.norm(element_gradients(out, band.elements), axis=1)
    assert g.min() >= 0.8 and g.max() <= 1.2


def test_reinit_far_field_clamp():
    ls = sphere_ls(n=12)
    mesh = ls.mesh
    band = select_band(ls, 1)
    tiny = LevelSet(mesh, 1e-3 * ls.values)
    out = reinitialize(tiny, band, extract(tiny, band))
    far = np.setdiff1d(np.arange(mesh.n_nodes), band.nodes)
    np.testing.assert_allclose(np.abs(out.values[far]), 2 * mesh.h)
    assert np.all(np.sign(out.values[far]) == np.sign(tiny.values[far]))
    big = reinitialize(ls, band, extract(ls, band))
    keep = far[np.abs(ls.values[far]) >= 2 * mesh.h]
    np.testing.assert_array_equal(big.values[keep], ls.values[keep])


def test_reinit_fixed_nodes_untouched():
    ls = plane_ls(n=4, scale=2.0)
    band = select_band(ls, 2)
    fixed = ls.mesh.nodes[:, 0] < 0.3
    out = reinitialize(ls, band, extract(ls, band), fixed=fixed)
    np.testing.assert_array_equal(out.values[fixed], ls.values[fixed])


def test_reinit_vertex_mode_overestimates():
    ls = sphere_ls(n=12)
    band = select_band(ls, 2)
    s = extract(ls, band)
    tri = reinitialize(ls, band, s, mode="triangle").values[band.nodes]
    ver = reinitialize(ls, band, s, mode="vertex").values[band.nodes]
    assert np.all(np.abs(ver) >= np.abs(tri) - 1e-12)


def test_reinit_empty_surface_raises():
    ls = plane_ls(n=2)
    band = select_band(ls, 0)
    empty = extract(ls, elements=[])
    with pytest.raises(LevelSetError):
        reinitialize(ls, band, empty)


def test_interface_mode_keeps_zero_set():
    ls = sphere_ls(n=16, r=0.25)
    mesh = ls.mesh
    drift = {}
    for mode in ("triangle", "interface"):
        cur = ls
        for _ in range(5):
            band = select_band(cur, 2)
            cur = apply_zero_perturbation(reinitialize(cur, band, extract(cur, band), mode=mode))
        s = extract(cur, select_band(cur, 0))
        drift[mode] = abs(np.linalg.norm(s.vertices, axis=1).mean() - 0.25)
    assert drift["interface"] < drift["triangle"]
    assert drift["interface"] < 1e-2 * mesh.h
