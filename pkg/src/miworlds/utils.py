"""Helper utilities for miworlds."""

import re
from pathlib import Path
from typing import List, Optional

from miworlds.exceptions import ConfigurationError


def parse_offsets(offset_str: Optional[str]) -> List[int]:
    """Parse a comma-separated offset string into a list of integers.

    Args:
        offset_str: Offsets such as "-2,-1,1,2"

    Returns:
        List of integer offsets in the given order

    Raises:
        ConfigurationError: If an entry is not an integer

    Examples:
        >>> parse_offsets("-2, -1, 1, 2")
        [-2, -1, 1, 2]
        >>> parse_offsets(None)
        []
    """
    if not offset_str:
        return []
    offsets = []
    for item in offset_str.split(","):
        item = item.strip()
        if not item:
            continue
        if not re.fullmatch(r"[+-]?\d+", item):
            raise ConfigurationError(f"Offset '{item}' is not an integer")
        offsets.append(int(item))
    return offsets


def parse_float_list(value_str: Optional[str]) -> List[float]:
    """Parse a comma-separated list of numbers.

    Examples:
        >>> parse_float_list("1e-6, 5e-7")
        [1e-06, 5e-07]
    """
    if not value_str:
        return []
    values = []
    for item in value_str.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise ConfigurationError(f"'{item}' is not a number")
    return values


def run_output_dir(base_dir: Path, name: str) -> Path:
    """Directory for one run's artifacts, named after the run.

    Examples:
        >>> run_output_dir(Path("results"), "fig2_excited_toy")
        PosixPath('results/fig2_excited_toy')
    """
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "run"
    return base_dir / safe


def variant_name(name: str, dt: float) -> str:
    """Name of a dt variant of a run.

    Examples:
        >>> variant_name("fig3_truncated_toy", 1e-9)
        'fig3_truncated_toy_dt1e-09'
    """
    return f"{name}_dt{dt:g}"
