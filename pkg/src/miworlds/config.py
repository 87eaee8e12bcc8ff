"""Configuration file handling for miworlds.

A run configuration is a YAML mapping of fixed sections. Every section
has a fixed key set; unknown sections or keys are rejected so that a typo
in ``dt`` or ``order`` cannot silently fall back to a default.
"""

import copy
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from miworlds.core import PhysicalParams, UnitSystem
from miworlds.density import DensityModel
from miworlds.exceptions import ConfigurationError, OutputError
from miworlds.integrator import SimulationConfig
from miworlds.potential import EdgePolicy, ExternalPotential, PotentialKind, PotentialSpec
from miworlds.scenarios import DEFAULT_COLLAPSE_FRACTION, ScenarioOverrides
from miworlds.stencil import OffsetSet, build_stencil, default_offsets
from miworlds.utils import parse_offsets

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "scenario": {
        "name": None,
        "overrides": {},
    },
    "density": {
        "model": "ground",
        "n_worlds": 50,
    },
    "potential": {
        "kind": "toy",
        "order": 4,
        "offsets": None,
        "edge_policy": "skip",
    },
    "integration": {
        "dt": 1e-5,
        "steps": 1000,
        "record_every": 1,
        "pinned_left": 0,
        "pinned_right": 0,
        "external": "harmonic",
    },
    "output": {
        "directory": "results",
        "formats": ["csv", "json"],
    },
    "units": {
        "mode": "dimensionless",
        "mass": 1.0,
        "hbar": 1.0,
        "omega": 1.0,
    },
}

FLOAT_KEYS = {
    "integration": {"dt"},
    "units": {"mass", "hbar", "omega"},
    "overrides": {"dt", "horizon", "collapse_fraction"},
}
INT_KEYS = {
    "density": {"n_worlds"},
    "potential": {"order"},
    "integration": {"steps", "record_every", "pinned_left", "pinned_right"},
    "overrides": {"steps", "record_every"},
}

SCENARIO_OVERRIDE_KEYS = {
    "dt", "steps", "horizon", "full", "record_every", "collapse_fraction", "refine",
}
OUTPUT_FORMATS = {"csv", "json"}


def load_config(config_file: Path) -> Dict[str, Any]:
    """Load configuration from YAML file.

    Args:
        config_file: Path to YAML configuration file

    Returns:
        Dictionary of configuration parameters as written in the file

    Raises:
        ConfigurationError: If the file is missing, is not valid YAML or
            does not hold a mapping
    """
    if not config_file.exists():
        raise ConfigurationError(f"Configuration file not found: {config_file}")

    try:
        with open(config_file, "r") as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in {config_file}: {e}")

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigurationError(
            f"Configuration file {config_file} must contain a mapping of sections"
        )
    return config


def save_config(config_file: Path, config: Dict[str, Any]) -> None:
    """Save configuration to YAML file.

    Args:
        config_file: Path to save configuration
        config: Dictionary of configuration parameters

    Raises:
        OutputError: If unable to write config file
    """
    try:
        config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(config_file, "w") as f:
            yaml.safe_dump(config, f, default_flow_style=False, sort_keys=False)
    except OSError as e:
        raise OutputError(f"Could not write configuration to {config_file}: {e}")


def _coerce_number(name: str, value: Any, integer: bool) -> Any:
    """Numeric value for a config key.

    YAML 1.1 reads ``1e-8`` (no dot in the mantissa) as a string, so
    numeric strings are converted here. Integral floats such as ``1.0e5``
    are accepted for integer keys. Other types pass through for the
    builders to validate.

    Raises:
        ConfigurationError: If a string value is not a number
    """
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, str):
        try:
            value = float(value.strip())
        except ValueError:
            raise ConfigurationError(f"{name} must be a number, got {value!r}")
    if integer and isinstance(value, float):
        if not value.is_integer():
            raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        return int(value)
    return value


def _coerce_section(prefix: str, table: str, values: Dict[str, Any]) -> None:
    for key in FLOAT_KEYS.get(table, ()):
        if key in values:
            values[key] = _coerce_number(f"{prefix}.{key}", values[key], integer=False)
    for key in INT_KEYS.get(table, ()):
        if key in values:
            values[key] = _coerce_number(f"{prefix}.{key}", values[key], integer=True)


def resolve_config(raw: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Merge a loaded configuration over the defaults, rejecting unknown keys.

    Returns:
        A fully populated configuration dictionary

    Raises:
        ConfigurationError: For unknown sections or keys, or a section that
            is not a mapping
    """
    resolved = copy.deepcopy(DEFAULTS)
    for section, values in (raw or {}).items():
        if section not in DEFAULTS:
            raise ConfigurationError(
                f"Unknown configuration section '{section}'. "
                f"Valid sections: {', '.join(DEFAULTS)}"
            )
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigurationError(f"Section '{section}' must be a mapping")
        for key, value in values.items():
            if key not in DEFAULTS[section]:
                raise ConfigurationError(
                    f"Unknown key '{key}' in section '{section}'. "
                    f"Valid keys: {', '.join(DEFAULTS[section])}"
                )
            resolved[section][key] = value

    overrides = resolved["scenario"]["overrides"] or {}
    if not isinstance(overrides, dict):
        raise ConfigurationError("scenario.overrides must be a mapping")
    unknown = set(overrides) - SCENARIO_OVERRIDE_KEYS
    if unknown:
        raise ConfigurationError(
            f"Unknown scenario override(s): {', '.join(sorted(unknown))}. "
            f"Valid overrides: {', '.join(sorted(SCENARIO_OVERRIDE_KEYS))}"
        )
    resolved["scenario"]["overrides"] = dict(overrides)

    for section in ("density", "potential", "integration", "units"):
        _coerce_section(section, section, resolved[section])
    _coerce_section("scenario.overrides", "overrides", resolved["scenario"]["overrides"])

    formats = resolved["output"]["formats"]
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    bad = set(formats) - OUTPUT_FORMATS
    if bad:
        raise ConfigurationError(f"Unknown output format(s): {', '.join(sorted(bad))}")
    resolved["output"]["formats"] = list(formats)
    return resolved


def apply_overrides(config: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Apply CLI overrides, given as ``"section.key": value``, over a resolved config.

    None values are ignored so that unset CLI options keep the file value.

    Raises:
        ConfigurationError: If an override names an unknown key
    """
    merged = copy.deepcopy(config)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigurationError(f"Unknown configuration override '{dotted}'")
        merged[section][key] = value
    return merged


# =============================================================================
# BUILDERS
# =============================================================================

def _unit_system(config: Dict[str, Any]) -> UnitSystem:
    try:
        return UnitSystem(config["units"]["mode"])
    except ValueError:
        raise ConfigurationError(
            f"units.mode must be one of: {', '.join(u.value for u in UnitSystem)}"
        )


def build_physical_params(config: Dict[str, Any]) -> PhysicalParams:
    """Physical constants used to convert output to physical units."""
    units = config["units"]
    _unit_system(config)
    return PhysicalParams(mass=units["mass"], hbar=units["hbar"], omega=units["omega"])


def output_params(config: Dict[str, Any]) -> Optional[PhysicalParams]:
    """Constants for physical-unit output, or None for dimensionless output."""
    return _unit_system(config).output_params(build_physical_params(config))


def build_density_model(config: Dict[str, Any]) -> DensityModel:
    return DensityModel(config["density"]["model"])


def build_potential_spec(config: Dict[str, Any]) -> PotentialSpec:
    """PotentialSpec from the ``potential`` section."""
    section = config["potential"]
    try:
        kind = PotentialKind(section["kind"])
        edge_policy = EdgePolicy(section["edge_policy"])
    except ValueError as e:
        raise ConfigurationError(f"Invalid potential section: {e}")

    if kind is not PotentialKind.RATIONAL:
        return PotentialSpec(kind, edge_policy=edge_policy)

    order = section["order"]
    offsets = section["offsets"]
    if offsets is None:
        offset_set = default_offsets(order)
    elif isinstance(offsets, str):
        offset_set = OffsetSet(tuple(parse_offsets(offsets)))
    else:
        offset_set = OffsetSet(tuple(offsets))
    return PotentialSpec(kind, build_stencil(offset_set, order), edge_policy)


def build_simulation_config(config: Dict[str, Any], frame: PhysicalParams) -> SimulationConfig:
    """SimulationConfig from the ``potential`` and ``integration`` sections."""
    section = config["integration"]
    external = section["external"]
    if external == "harmonic":
        external_potential = ExternalPotential.harmonic(frame.omega)
    elif external in (None, "none"):
        external_potential = ExternalPotential.none()
    else:
        raise ConfigurationError(
            f"integration.external must be 'harmonic' or 'none', got {external!r}"
        )
    return SimulationConfig(
        potential=build_potential_spec(config),
        dt=section["dt"],
        steps=section["steps"],
        external=external_potential,
        record_every=section["record_every"],
        pinned_left=section["pinned_left"],
        pinned_right=section["pinned_right"],
    )


def build_scenario_overrides(config: Dict[str, Any]) -> ScenarioOverrides:
    values = dict(config["scenario"]["overrides"])
    values.setdefault("collapse_fraction", DEFAULT_COLLAPSE_FRACTION)
    return ScenarioOverrides(**values)
