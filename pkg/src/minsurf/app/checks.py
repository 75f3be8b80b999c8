"""Static verification runs that do not evolve the surface."""

import math

import numpy as np

from ..evolution import EvolutionConfig, _restrict, _surface_velocity
from ..levelset import apply_zero_perturbation, init_from_primitive
from ..mesh import build_box_mesh

__all__ = [
    "curvature_error",
    "observed_orders",
    "fitted_order",
    "near_vertex_sphere",
    "stabilization_iterations",
]


def curvature_error(domain, shape, exact_curvature, cfg=EvolutionConfig()):
    """Surface L2 error of the discrete mean curvature on a fixed surface.

    Returns
    -------
    h : float
        Mesh size (maximum edge length).
    error : float
        ``sqrt(e^T M e)`` with ``e = H_h - exact_curvature`` on the active nodes.
    """
    mesh = build_box_mesh(domain)
    ls = apply_zero_perturbation(init_from_primitive(mesh, shape))
    state, _ = _surface_velocity(ls, cfg)
    active = state.dofs.active
    e = state.curvature[active] - exact_curvature
    M = _restrict(state.mass, active)
    return mesh.h, float(math.sqrt(max(e @ (M @ e), 0.0)))


def observed_orders(hs, errors):
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for successive levels."""
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1])
        for i in range(len(hs) - 1)
    ]


def fitted_order(hs, errors):
    """Least-squares slope of ``log e`` against ``log h``."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def near_vertex_sphere(divisions=24, radius=0.3, offset=1e-4):
    """Sphere whose surface passes ``offset * h`` inside six mesh nodes.

    The nodes ``(+-radius, 0, 0)`` and permutations lie on the grid of
    ``[-0.6, 0.6]^3`` for suitable divisions; shrinking the radius by a tiny
    amount makes the elements around them carry minute cut pieces.

    Returns
    -------
    LevelSet
        Perturbed exact signed distance of the shrunken sphere.
    """
    from ..levelset import Sphere
    from ..mesh import BoxDomain

    mesh = build_box_mesh(BoxDomain((-0.6,) * 3, (0.6,) * 3, (divisions,) * 3))
    on_grid = np.isclose(np.abs(mesh.nodes).max(axis=1), radius) & (np.count_nonzero(mesh.nodes, axis=1) == 1)
    if not on_grid.any():
        raise ValueError("radius does not hit a mesh node on the axes")
    shape = Sphere((0.0, 0.0, 0.0), radius - offset * mesh.h)
    return apply_zero_perturbation(init_from_primitive(mesh, shape))


def stabilization_iterations(ls, c_j, h_power=0, ring_count=2):
    """CG iterations for ``(M + J) u = -S x`` with the given jump weight.

    Returns
    -------
    iterations : int
        Iterations of the block solve, or ``None`` if CG did not reach the
        tolerance within ``10 N`` iterations.
    n_dofs : int
    """
    from .. import assembly, isosurface, levelset
    from ..solvers import pcg

    mesh = ls.mesh
    band = levelset.select_band(ls, ring_count)
    surface = isosurface.extract(ls, band)
    dofs = assembly.build_dof_map(band, mesh.nodes)
    M = assembly.assemble_mass(surface, mesh, dofs)
    S = assembly.assemble_stiffness(surface, mesh, dofs)
    J = assembly.assemble_stabilization(band, mesh, dofs, c_j, h_power)
    A, rhs = assembly.apply_clamp(M + J, dofs, -(S @ mesh.nodes[dofs.nodes]))
    res = pcg(A, rhs, rtol=1e-10, maxiter=10 * dofs.n_dofs, raise_on_failure=False)
    return (res.iterations if res.converged else None), dofs.n_dofs
