"""Command line interface: ``minsurf run | list | converge``."""

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from ..errors import ConfigError, EvolutionError, MinsurfError
from ..evolution import run
from ..levelset import init_from_primitive
from ..mesh import build_box_mesh
from . import checks
from .config import evolution_config, parse_config
from .io import atomic_write, write_history_csv, write_surface_vtk
from .scenarios import SPHERE_CURVATURE, get_scenario, registry

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_MAX_STEPS = 2
EXIT_USAGE = 64

logger = logging.getLogger("minsurf")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser():
    p = _Parser(prog="minsurf", description="Minimal surfaces by level set mean curvature flow.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="evolve one scenario")
    r.add_argument("--config", help="key = value configuration file")
    r.add_argument("--scenario")
    r.add_argument("--divisions", help="nx,ny,nz")
    r.add_argument("--epsilon")
    r.add_argument("--max-steps", dest="max_steps")
    r.add_argument("--alpha")
    r.add_argument("--k-max", dest="k_max")
    r.add_argument("--cj")
    r.add_argument("--h-power", dest="h_power")
    r.add_argument("--ring-count", dest="ring_count")
    r.add_argument("--reinit", choices=["triangle", "vertex", "interface"])
    r.add_argument("--norm", choices=["nodal", "l2"])
    r.add_argument("--walls", choices=["slip", "free"])
    r.add_argument("--cfl", choices=["nodes", "surface"])
    r.add_argument("--out")
    r.add_argument("--cadence")

    sub.add_parser("list", help="list scenarios")

    c = sub.add_parser("converge", help="static curvature convergence study")
    c.add_argument("--scenario", default="sphere-curvature")
    c.add_argument("--divisions", default="12,24,48", help="comma separated cube divisions")
    c.add_argument("--out", default="out")
    return p


def _cmd_list(args, stdout):
    for s in registry():
        tag = "  [experimental]" if s.experimental else ""
        stdout.write(f"{s.name:<20} {s.description}{tag}\n")
    return EXIT_OK


def _cmd_run(args, stdout):
    keys = ("scenario", "divisions", "epsilon", "max_steps", "alpha", "k_max", "cj",
            "h_power", "ring_count", "reinit", "norm", "walls", "cfl", "out", "cadence")
    run_cfg = parse_config(args.config, {k: getattr(args, k) for k in keys})
    scenario = get_scenario(run_cfg.scenario)
    domain = scenario.domain
    if run_cfg.divisions is not None:
        domain = domain.with_divisions(run_cfg.divisions)
    cfg = evolution_config(run_cfg, scenario)
    try:
        os.makedirs(run_cfg.out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {run_cfg.out}: {exc}") from None

    mesh = build_box_mesh(domain)
    ls0 = init_from_primitive(mesh, scenario.shape)

    latest = {}

    def write(state):
        H = np.zeros(mesh.n_nodes)
        U = np.zeros((mesh.n_nodes, 3))
        H[state.dofs.nodes] = state.curvature
        U[state.dofs.nodes] = state.velocity
        write_surface_vtk(
            state.surface, os.path.join(run_cfg.out, f"surface_{state.step:06d}.vtk"), H=H, velocity=U
        )

    def dump(state):
        # the final surface is always written, whatever the cadence
        latest["state"] = state
        if state.step % run_cfg.cadence == 0:
            write(state)
        return False

    result = run(mesh, ls0, cfg, neck=scenario.neck, callback=dump)
    final = latest.get("state")
    if final is not None and final.step % run_cfg.cadence:
        write(final)
    write_history_csv(result.reports, os.path.join(run_cfg.out, "history.csv"))
    last = result.reports[-1] if result.reports else None
    summary = f"{scenario.name}: {result.status} after {len(result.reports)} step(s)"
    if last is not None:
        summary += f", area {last.area:.6g}, nodal |H| {last.nodal_curvature_norm:.4g}"
        if last.neck_radius is not None:
            summary += f", neck radius {last.neck_radius:.4g}"
    stdout.write(summary + "\n")
    return EXIT_MAX_STEPS if result.status == "max_steps" else EXIT_OK


def _cmd_converge(args, stdout):
    if args.scenario != SPHERE_CURVATURE.name:
        raise ConfigError(f"converge supports only {SPHERE_CURVATURE.name!r}")
    try:
        levels = [int(v) for v in args.divisions.split(",")]
    except ValueError:
        raise ConfigError(f"bad --divisions {args.divisions!r}") from None
    if len(levels) < 2 or any(v < 1 for v in levels):
        raise ConfigError("converge needs at least two positive division counts")
    os.makedirs(args.out, exist_ok=True)
    shape = SPHERE_CURVATURE.shape
    exact = 1.0 / shape.radius
    hs, errors = [], []
    for n in levels:
        h, e = checks.curvature_error(SPHERE_CURVATURE.domain.with_divisions((n, n, n)), shape, exact)
        hs.append(h)
        errors.append(e)
        stdout.write(f"divisions {n:4d}  h {h:.5f}  L2 error {e:.6e}\n")
    orders = [None] + checks.observed_orders(hs, errors)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["divisions", "h", "l2_error", "order"])
    for n, h, e, o in zip(levels, hs, errors, orders):
        w.writerow([n, repr(h), repr(e), "" if o is None else repr(o)])
    atomic_write(os.path.join(args.out, "convergence.csv"), buf.getvalue())
    stdout.write(f"fitted order {checks.fitted_order(hs, errors):.3f}\n")
    return EXIT_OK


def main(argv=None, stdout=None, stderr=None):
    """Entry point; returns the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return exc.code or 0
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "list": _cmd_list, "converge": _cmd_converge}[args.command]
    try:
        return handler(args, stdout)
    except ConfigError as exc:
        stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except EvolutionError as exc:
        stderr.write(f"error at step {exc.step}: {exc}\n")
        return EXIT_RUNTIME
    except (MinsurfError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
