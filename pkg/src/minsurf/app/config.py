"""Run configuration: ``key = value`` files merged under command line flags."""

from dataclasses import dataclass, fields

from ..errors import ConfigError
from ..evolution import EvolutionConfig
from .scenarios import get_scenario, scenario_names

__all__ = ["RunConfig", "parse_config", "parse_config_text", "evolution_config"]


def _divisions(text):
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError("expected nx,ny,nz")
    vals = tuple(int(p) for p in parts)
    if any(v < 1 for v in vals):
        raise ValueError("divisions must be >= 1")
    return vals


def _choice(*options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return conv


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


# config key -> (RunConfig field, converter)
_KEYS = {
    "scenario": ("scenario", str),
    "divisions": ("divisions", _divisions),
    "epsilon": ("epsilon", float),
    "max_steps": ("max_steps", _nonneg_int),
    "alpha": ("alpha", float),
    "k_max": ("k_max", float),
    "cj": ("cj", float),
    "h_power": ("h_power", int),
    "ring_count": ("ring_count", _nonneg_int),
    "reinit": ("reinit", _choice("triangle", "vertex", "interface")),
    "norm": ("norm", _choice("nodal", "l2")),
    "walls": ("walls", _choice("slip", "free")),
    "cfl": ("cfl", _choice("nodes", "surface")),
    "out": ("out", str),
    "cadence": ("cadence", _positive_int),
}


@dataclass
class RunConfig:
    """Everything a ``run`` invocation needs; ``None`` means scenario default."""

    scenario: str = None
    divisions: tuple = None
    epsilon: float = None
    max_steps: int = None
    alpha: float = None
    k_max: float = None
    cj: float = None
    h_power: int = None
    ring_count: int = None
    reinit: str = None
    norm: str = None
    walls: str = None
    cfl: str = None
    out: str = "out"
    cadence: int = 1


def _convert(key, value, where):
    if key not in _KEYS:
        raise ConfigError(f"{where}: unknown key {key!r} (valid: {', '.join(sorted(_KEYS))})")
    name, conv = _KEYS[key]
    try:
        return name, conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad value {value!r} for {key}: {exc}") from None


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}: {raw.strip()}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        name, val = _convert(key.replace("-", "_"), value, where)
        values[name] = val
    return values


def parse_config(path=None, overrides=None):
    """Build a :class:`RunConfig` from an optional file and flag overrides.

    Parameters
    ----------
    path : str, optional
        UTF-8 ``key = value`` file.
    overrides : dict, optional
        Values from command line flags (config key -> raw value or
        already converted value); they take precedence over the file.

    Raises
    ------
    ConfigError
        On unknown keys, malformed values or an unknown scenario.
    """
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text, source=str(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, str):
            name, value = _convert(key, value, f"--{key.replace('_', '-')}")
        else:
            if key not in _KEYS:
                raise ConfigError(f"unknown option {key!r}")
            name = _KEYS[key][0]
        values[name] = value
    cfg = RunConfig(**values)
    if cfg.scenario is None:
        raise ConfigError(f"missing scenario (valid: {', '.join(scenario_names())})")
    try:
        get_scenario(cfg.scenario)
    except KeyError:
        raise ConfigError(
            f"unknown scenario {cfg.scenario!r} (valid: {', '.join(scenario_names())})"
        ) from None
    return cfg


_TO_EVOLUTION = {
    "epsilon": "epsilon",
    "max_steps": "max_steps",
    "alpha": "alpha",
    "k_max": "k_max",
    "cj": "c_j",
    "h_power": "h_power",
    "ring_count": "ring_count",
    "reinit": "reinit_mode",
    "norm": "norm",
    "walls": "walls",
    "cfl": "cfl",
}


def evolution_config(run_cfg, scenario):
    """Library defaults, then scenario overrides, then explicit run settings."""
    kwargs = dict(scenario.overrides)
    kwargs["clamps"] = scenario.clamps
    for f in fields(run_cfg):
        target = _TO_EVOLUTION.get(f.name)
        value = getattr(run_cfg, f.name)
        if target is not None and value is not None:
            kwargs[target] = value
    try:
        return EvolutionConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
