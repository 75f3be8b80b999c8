"""Scenario registry, configuration, file output and the command line."""

from .config import RunConfig, evolution_config, parse_config
from .io import read_surface_vtk, write_history_csv, write_surface_vtk
from .scenarios import Scenario, get_scenario, registry
