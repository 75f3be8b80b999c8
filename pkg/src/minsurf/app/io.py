"""Legacy VTK surface files and CSV convergence histories."""

import csv
import io
import os
import tempfile

import numpy as np

__all__ = [
    "write_surface_vtk",
    "read_surface_vtk",
    "write_history_csv",
    "HISTORY_COLUMNS",
    "atomic_write",
]

HISTORY_COLUMNS = [
    "step",
    "time",
    "k",
    "nodal_curvature_norm",
    "l2_curvature_norm",
    "area",
    "triangles",
    "cg_iters",
    "neck_radius",
]


def atomic_write(path, text):
    """Write ``text`` to a temp file in the target directory, then rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v):
    return format(float(v) + 0.0, ".9g")  # no "-0"


def write_surface_vtk(surface, path, H=None, velocity=None):
    """Write a surface as legacy ASCII VTK POLYDATA.

    Parameters
    ----------
    surface : SurfaceMesh
    path : path-like
    H : ndarray, optional
        Scalar per background node; interpolated to the surface vertices
        along their parent edges. Defaults to zero.
    velocity : ndarray, optional
        3-vector per background node, interpolated likewise.
    """
    n = surface.n_vertices
    m = surface.n_triangles
    hv = np.zeros(n) if H is None else surface.interpolate(np.asarray(H, dtype=float))
    uv = np.zeros((n, 3)) if velocity is None else surface.interpolate(np.asarray(velocity, dtype=float))
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write("discrete zero level set\n")
    out.write("ASCII\n")
    out.write("DATASET POLYDATA\n")
    out.write(f"POINTS {n} float\n")
    for p in surface.vertices:
        out.write(" ".join(_num(c) for c in p) + "\n")
    out.write(f"POLYGONS {m} {4 * m}\n")
    for a, b, c in surface.triangles:
        out.write(f"3 {a} {b} {c}\n")
    out.write(f"POINT_DATA {n}\n")
    out.write("SCALARS H float 1\n")
    out.write("LOOKUP_TABLE default\n")
    for v in hv:
        out.write(_num(v) + "\n")
    out.write("VECTORS velocity float\n")
    for v in uv:
        out.write(" ".join(_num(c) for c in v) + "\n")
    atomic_write(path, out.getvalue())


def read_surface_vtk(path):
    """Minimal reader for files produced by :func:`write_surface_vtk`.

    Returns
    -------
    dict with ``points`` (n, 3), ``polygons`` (m, 3), ``H`` (n,),
    ``velocity`` (n, 3).
    """
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    lines = iter(tokens[4:])
    out = {}
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([next(lines).split() for _ in range(n)], dtype=float).reshape(n, 3)
        elif tag == "POLYGONS":
            m = int(parts[1])
            poly = np.array([next(lines).split() for _ in range(m)], dtype=int).reshape(m, 4)
            if m and not np.all(poly[:, 0] == 3):
                raise ValueError("only triangles supported")
            out["polygons"] = poly[:, 1:]
        elif tag == "POINT_DATA":
            out["n_point_data"] = int(parts[1])
        elif tag == "SCALARS":
            next(lines)  # LOOKUP_TABLE
            out[parts[1]] = np.array([next(lines) for _ in range(out["n_point_data"])], dtype=float)
        elif tag == "VECTORS":
            n = out["n_point_data"]
            out[parts[1]] = np.array([next(lines).split() for _ in range(n)], dtype=float).reshape(n, 3)
    return out


def write_history_csv(reports, path):
    """One row per :class:`StepReport`; empty ``neck_radius`` when not measured."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                r.step,
                repr(float(r.time)),
                repr(float(r.k)),
                repr(float(r.nodal_curvature_norm)),
                repr(float(r.l2_curvature_norm)),
                repr(float(r.area)),
                r.triangles,
                r.cg_iters,
                "" if r.neck_radius is None else repr(float(r.neck_radius)),
            ]
        )
    atomic_write(path, buf.getvalue())
