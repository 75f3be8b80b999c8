"""Named test geometries."""

from dataclasses import dataclass, field

from ..assembly import ZPlane
from ..evolution import NeckProbe
from ..levelset import Cylinder, Plane, Sphere
from ..mesh import BoxDomain

__all__ = ["Scenario", "registry", "get_scenario", "scenario_names", "SPHERE_CURVATURE"]

CATENOID_HEIGHT = 0.554518


@dataclass(frozen=True)
class Scenario:
    """Initial geometry, box and boundary clamps of one evolution problem.

    ``overrides`` holds :class:`EvolutionConfig` fields that differ from
    the library defaults for this scenario.
    """

    name: str
    domain: BoxDomain
    shape: object
    clamps: tuple = ()
    overrides: dict = field(default_factory=dict)
    neck: NeckProbe = None
    experimental: bool = False
    description: str = ""


def _cylinder_case(name, axis_xy, lo, hi, divisions, description, overrides=None):
    z0, z1 = lo[2], hi[2]
    return Scenario(
        name=name,
        domain=BoxDomain(lo, hi, divisions),
        shape=Cylinder((axis_xy[0], axis_xy[1], 0.0), (0.0, 0.0, 1.0), 0.5),
        clamps=(ZPlane(z0), ZPlane(z1)),
        neck=NeckProbe(axis_point=(axis_xy[0], axis_xy[1], 0.0), z_center=0.5 * (z0 + z1)),
        overrides=overrides or {},
        description=description,
    )


def registry():
    """All evolution scenarios, in listing order."""
    return [
        Scenario(
            name="plane",
            domain=BoxDomain((0, 0, 0), (1, 1, 1), (8, 8, 8)),
            shape=Plane((0.5, 0.5, 0.5), (0, 0, 1)),
            description="flat plane z = 0.5, already minimal",
        ),
        Scenario(
            name="sphere",
            domain=BoxDomain((-0.6,) * 3, (0.6,) * 3, (32, 32, 32)),
            shape=Sphere((0.0, 0.0, 0.0), 0.4),
            description="closed sphere R = 0.4 shrinking to a point",
        ),
        _cylinder_case(
            "catenoid", (0.0, 0.0), (-0.6, -0.6, 0.0), (0.6, 0.6, CATENOID_HEIGHT), (32, 32, 16),
            "cylinder r = 0.5 between fixed rings relaxing to a catenoid",
        ),
        _cylinder_case(
            "cut-catenoid", (0.0, 0.06), (-0.6, -0.6, 0.0), (0.6, 0.6, CATENOID_HEIGHT), (32, 32, 16),
            "off-centre cylinder (axis y = 0.06) relaxing to a catenoid",
        ),
        _cylinder_case(
            "collapsing-cylinder", (0.0, 0.0), (-1.0, -1.0, 0.0), (1.0, 1.0, 1.0), (32, 32, 16),
            "tall cylinder pinching off into two flat disks",
        ),
        Scenario(
            name="schwarz",
            domain=BoxDomain((0, 0, 0), (1, 1, 1), (32, 32, 32)),
            shape=Sphere((0.5, 0.5, 0.5), 0.5),
            experimental=True,
            description="sphere r = 0.5 touching the faces of a unit box (boundary conditions open)",
        ),
    ]


def scenario_names():
    return [s.name for s in registry()]


def get_scenario(name):
    for s in registry():
        if s.name == name:
            return s
    raise KeyError(name)


# static curvature check used by ``converge``; not an evolution scenario
SPHERE_CURVATURE = Scenario(
    name="sphere-curvature",
    domain=BoxDomain((-0.6,) * 3, (0.6,) * 3, (24, 24, 24)),
    shape=Sphere((0.0, 0.0, 0.0), 0.3),
    description="static sphere R = 0.3, L2 error of the discrete mean curvature",
)
