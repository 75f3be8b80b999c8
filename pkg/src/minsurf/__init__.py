"""Minimal surfaces by trace finite element mean curvature flow on level sets."""

from .errors import (
    AssemblyError,
    ConfigError,
    ConvergenceError,
    EmptyBandError,
    EvolutionError,
    LevelSetError,
    MeshError,
    MinsurfError,
)
from .mesh import BackgroundMesh, BoxDomain, build_box_mesh

__version__ = "0.1.0"
