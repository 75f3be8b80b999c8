"""Time stepping of the level set surface under discrete mean curvature flow.

Each step solves ``(M + J) u = -S x`` for the nodal velocity on the band,
evaluates ``H = -(n . u) / 2``, tests the stopping criterion, moves the
level set by ``phi <- phi - k n . u`` and redistances it.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import assembly, isosurface, levelset
from .closest import NodeProjector
from .errors import EmptyBandError, EvolutionError, MinsurfError
from .solvers import pcg

__all__ = [
    "EvolutionConfig",
    "NeckProbe",
    "StepReport",
    "StepState",
    "RunResult",
    "solve_velocity",
    "extend_velocity",
    "mean_curvature",
    "curvature_norms",
    "choose_timestep",
    "normal_speed",
    "on_clamp_planes",
    "assemble_step",
    "run",
]

logger = logging.getLogger(__name__)

# nodal normals shorter than this before renormalisation are treated as
# undefined and the node moves with the projected scalar normal speed
COHERENCE_MIN = 0.5


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of the evolution loop.

    ``walls="slip"`` fixes the velocity component normal to a box face at
    band nodes on that face; ``"free"`` leaves the natural boundary term.
    ``epsilon=None`` selects ``0.05 * sqrt(n)`` with ``n`` the number of
    nodes entering the nodal norm (an RMS curvature of 0.05); in ``l2``
    mode it selects ``0.05 * sqrt(area)``.

    ``cfl="nodes"`` bounds the step by the largest nodal velocity;
    ``"surface"`` by the largest velocity on the discrete surface, which
    stays bounded when a sub-cell feature drives the extended nodal field
    far off the surface.
    """

    epsilon: float = None
    max_steps: int = 500
    alpha: float = 0.5
    k_max: float = 0.01
    c_j: float = 1.0
    h_power: int = 0
    ring_count: int = 2
    reinit_mode: str = "triangle"
    cg_rel_tol: float = 1e-10
    cg_max_iter: int = None
    clamps: tuple = ()
    norm: str = "nodal"
    walls: str = "slip"
    cfl: str = "surface"

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.k_max <= 0:
            raise ValueError("k_max must be positive")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.ring_count < 0:
            raise ValueError("ring_count must be non-negative")
        if self.reinit_mode not in ("triangle", "vertex", "interface"):
            raise ValueError(f"unknown reinit mode {self.reinit_mode!r}")
        if self.norm not in ("nodal", "l2"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.walls not in ("slip", "free"):
            raise ValueError(f"unknown wall condition {self.walls!r}")
        if self.cfl not in ("nodes", "surface"):
            raise ValueError(f"unknown cfl mode {self.cfl!r}")


@dataclass(frozen=True)
class NeckProbe:
    """Where to measure the neck radius of a cylinder-like surface."""

    axis_point: tuple
    z_center: float
    axis_direction: tuple = (0.0, 0.0, 1.0)
    half_width: float = None  # defaults to 2 h

    def measure(self, surface, h):
        w = 2.0 * h if self.half_width is None else self.half_width
        try:
            return isosurface.min_radial_distance(
                surface, self.axis_point, self.axis_direction, (self.z_center - w, self.z_center + w)
            )
        except MinsurfError:
            return None


@dataclass(frozen=True)
class StepReport:
    step: int
    time: float
    k: float
    nodal_curvature_norm: float
    l2_curvature_norm: float
    area: float
    triangles: int
    cg_iters: int
    displacement: float
    neck_radius: float = None


@dataclass
class StepState:
    """Everything computed in one step; handed to the run callback."""

    step: int
    time: float
    levelset: object
    band: object
    surface: object
    dofs: object
    normals: object
    velocity: np.ndarray
    curvature: np.ndarray
    mass: object
    report: StepReport = None


@dataclass
class RunResult:
    levelset: object
    surface: object
    reports: list = field(default_factory=list)
    status: str = "max_steps"

    @property
    def converged(self):
        return self.status == "converged"


def solve_velocity(A, S, coords, dofs, cfg=EvolutionConfig()):
    """Solve ``A u_c = -S x_c`` for the three coordinate components.

    Clamped and inactive dofs are eliminated symmetrically, so their
    velocity is exactly zero; so are the wall-normal components flagged in
    ``dofs.slip``.

    Returns
    -------
    velocity : ndarray, shape (n_dofs, 3)
    iterations : int
        CG iterations of the block solve (one matrix product per iteration
        serves all three components).

    Raises
    ------
    ConvergenceError
        If CG does not converge within ``cg_max_iter`` iterations.
    """
    x = coords[dofs.nodes]
    keep = dofs.free_components
    rhs = np.where(keep, -(S @ x), 0.0)
    Ac = assembly.ConstrainedOperator(A, keep)
    maxiter = cfg.cg_max_iter if cfg.cg_max_iter is not None else 10 * dofs.n_dofs
    res = pcg(Ac, rhs, rtol=cfg.cg_rel_tol, maxiter=maxiter)
    u = np.where(keep, res.x, 0.0)
    return u, res.iterations


def extend_velocity(velocity, dofs, surface, mesh, projector=None):
    """Fill inactive, unclamped dofs with the velocity at their closest surface point.

    Wall-normal components flagged in ``dofs.slip`` stay zero.
    """
    fill = ~dofs.active & ~dofs.clamped
    if not fill.any():
        return velocity
    nodal = np.zeros((mesh.n_nodes, 3))
    nodal[dofs.nodes] = velocity
    at_vertices = surface.interpolate(nodal)
    out = velocity.copy()
    projector = projector or NodeProjector(surface, mesh.nodes)
    out[fill] = projector.extend(at_vertices, dofs.nodes[fill])
    if dofs.slip is not None:
        out[dofs.slip] = 0.0
    return out


def mean_curvature(velocity, normals):
    """Nodal mean curvature ``H = -(n . u) / 2``."""
    n = normals.nodal_normals if hasattr(normals, "nodal_normals") else normals
    return -0.5 * np.einsum("ij,ij->i", n, velocity)


def curvature_norms(H, M):
    """Euclidean norm of the nodal values and the ``L2(Gamma_h)`` norm via ``M``."""
    H = np.asarray(H, dtype=float)
    nodal = float(np.sqrt(H @ H))
    l2 = float(np.sqrt(max(H @ (M @ H), 0.0)))
    return nodal, l2


def choose_timestep(velocity, h, cfg=EvolutionConfig()):
    """``k = min(k_max, alpha h / max|u|)``; ``k_max`` for a resting surface."""
    vmax = float(np.max(np.linalg.norm(velocity, axis=1))) if len(velocity) else 0.0
    if vmax == 0.0:
        return cfg.k_max
    return min(cfg.k_max, cfg.alpha * h / vmax)


def assemble_step(ls, cfg, band=None):
    """Band, surface, dofs and operators for the current level set.

    Returns
    -------
    dict with keys ``band, surface, dofs, M, S, J``.
    """
    mesh = ls.mesh
    band = levelset.select_band(ls, cfg.ring_count) if band is None else band
    surface = isosurface.extract(ls, band)
    if surface.n_triangles == 0:
        raise EmptyBandError("cut elements produced no surface triangles")
    walls = (mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)) if cfg.walls == "slip" else None
    dofs = assembly.build_dof_map(band, mesh.nodes, cfg.clamps, walls)
    M = assembly.assemble_mass(surface, mesh, dofs)
    S = assembly.assemble_stiffness(surface, mesh, dofs)
    J = assembly.assemble_stabilization(band, mesh, dofs, cfg.c_j, cfg.h_power)
    return dict(band=band, surface=surface, dofs=dofs, M=M, S=S, J=J)


def _surface_velocity(ls, cfg):
    """Assemble and solve at the current level set; returns a StepState without report."""
    mesh = ls.mesh
    ops = assemble_step(ls, cfg)
    band, surface, dofs = ops["band"], ops["surface"], ops["dofs"]
    projector = NodeProjector(surface, mesh.nodes)
    normals = levelset.build_normal_field(ls, band, surface, projector)
    u, iters = solve_velocity(ops["M"] + ops["J"], ops["S"], mesh.nodes, dofs, cfg)
    u = extend_velocity(u, dofs, surface, mesh, projector)
    H = mean_curvature(u, normals)
    state = StepState(
        step=0, time=0.0, levelset=ls, band=band, surface=surface, dofs=dofs,
        normals=normals, velocity=u, curvature=H, mass=ops["M"],
    )
    return state, iters


def run(mesh, ls0, cfg=EvolutionConfig(), neck=None, callback=None):
    """Evolve the zero set of ``ls0`` until it is minimal, vanishes or time runs out.

    Parameters
    ----------
    mesh : BackgroundMesh
    ls0 : LevelSet
        Initial level set; perturbed away from exact zeros internally.
    cfg : EvolutionConfig
    neck : NeckProbe, optional
        Adds the neck radius to every report.
    callback : callable, optional
        Called with the :class:`StepState` of every step after its report is
        built; returning ``True`` stops the run with status ``"stopped"``.

    Returns
    -------
    RunResult
        ``status`` is ``"converged"``, ``"max_steps"``, ``"vanished"`` or
        ``"stopped"``.

    Raises
    ------
    EvolutionError
        Wrapping any stage failure, tagged with the step index.
    """
    h = mesh.h
    ls = levelset.apply_zero_perturbation(ls0)
    fixed = _clamped_nodes(mesh, cfg.clamps)
    t = 0.0
    reports = []
    surface = None
    for step in range(cfg.max_steps + 1):
        try:
            state, iters = _surface_velocity(ls, cfg)
        except EmptyBandError:
            logger.info("step %d: surface vanished", step)
            return RunResult(ls, surface if surface is not None else isosurface._empty_surface(), reports, "vanished")
        except MinsurfError as exc:
            raise EvolutionError(str(exc), step) from exc
        surface = state.surface
        dofs = state.dofs
        active = dofs.active
        nodal_norm, l2_norm = curvature_norms(state.curvature[active], _restrict(state.mass, active))
        if cfg.norm == "nodal":
            eps = cfg.epsilon if cfg.epsilon is not None else 0.05 * math.sqrt(active.sum())
            measure = nodal_norm
        else:
            eps = cfg.epsilon if cfg.epsilon is not None else 0.05 * math.sqrt(isosurface.total_area(surface))
            measure = l2_norm
        done = measure <= eps
        last = step == cfg.max_steps
        cfl_velocity = _cfl_velocity(state, cfg)
        k = 0.0 if (done or last) else choose_timestep(cfl_velocity, h, cfg)
        vmax = float(np.max(np.linalg.norm(cfl_velocity, axis=1)))
        report = StepReport(
            step=step,
            time=t,
            k=k,
            nodal_curvature_norm=nodal_norm,
            l2_curvature_norm=l2_norm,
            area=isosurface.total_area(surface),
            triangles=surface.n_triangles,
            cg_iters=iters,
            displacement=k * vmax,
            neck_radius=neck.measure(surface, h) if neck is not None else None,
        )
        reports.append(report)
        state.step, state.time, state.report = step, t, report
        logger.debug("step %d t=%.5g k=%.3g |H|=%.4g area=%.5g", step, t, k, measure, report.area)
        if callback is not None and callback(state):
            return RunResult(ls, surface, reports, "stopped")
        if done:
            return RunResult(ls, surface, reports, "converged")
        if on_clamp_planes(surface, cfg.clamps, 2.0 * h):
            logger.info("step %d: only clamped-plane components remain", step)
            return RunResult(ls, surface, reports, "vanished")
        if last:
            break
        try:
            ls = _advance_and_reinit(ls, state, k, vmax, cfg, fixed)
        except EmptyBandError:
            logger.info("step %d: surface vanished during advection", step)
            return RunResult(ls, surface, reports, "vanished")
        except MinsurfError as exc:
            raise EvolutionError(str(exc), step) from exc
        t += k
    return RunResult(ls, surface, reports, "max_steps")


def on_clamp_planes(surface, clamps, reach):
    """True when every surface vertex lies within ``reach`` of a clamp plane.

    The free part of the surface has then vanished and only the flat
    components spanning the clamped rings remain. Clamps without a
    ``distance`` method are ignored; no clamps means False.
    """
    planes = [c for c in clamps if hasattr(c, "distance")]
    if not planes or surface.n_vertices == 0:
        return False
    d = np.min([c.distance(surface.vertices) for c in planes], axis=0)
    return bool(np.all(d <= reach))


def _cfl_velocity(state, cfg):
    if cfg.cfl == "nodes":
        return state.velocity
    full = np.zeros((state.levelset.mesh.n_nodes, 3))
    full[state.dofs.nodes] = state.velocity
    return state.surface.interpolate(full)


def normal_speed(state):
    """Nodal ``n . u`` with the projected scalar speed where ``n`` is undefined."""
    normals = state.normals
    speed = np.einsum("ij,ij->i", normals.nodal_normals, state.velocity)
    weak = normals.coherence < COHERENCE_MIN if normals.coherence is not None else np.zeros(len(speed), bool)
    if weak.any():
        projected = levelset.project_normal_speed(
            state.levelset.mesh, state.band, state.surface, normals, state.velocity
        )
        speed[weak] = projected[weak]
    return speed


def _restrict(M, mask):
    idx = np.flatnonzero(mask)
    return M[idx][:, idx]


def _clamped_nodes(mesh, clamps):
    fixed = np.zeros(mesh.n_nodes, dtype=bool)
    for pred in clamps:
        fixed |= np.asarray(pred(mesh.nodes), dtype=bool)
    return fixed


def _advance_and_reinit(ls, state, k, vmax, cfg, fixed):
    mesh = ls.mesh
    moved = levelset.advance(ls, state.band, state.normals, state.velocity, k, normal_speed(state))
    moved = levelset.apply_zero_perturbation(moved)
    rings = max(cfg.ring_count, math.ceil(k * vmax / mesh.h) + 1)
    band = levelset.select_band(moved, rings)
    surface = isosurface.extract(moved, band)
    if surface.n_triangles == 0:
        raise EmptyBandError("advected surface is empty")
    nodes = np.union1d(band.nodes, state.band.nodes)
    out = levelset.reinitialize(
        moved, replace(band, ring_count=rings), surface, mode=cfg.reinit_mode, fixed=fixed, nodes=nodes
    )
    return levelset.apply_zero_perturbation(out)
