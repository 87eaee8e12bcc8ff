"""Input validation utilities for miworlds."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from miworlds.core import WorldEnsemble, as_positions
from miworlds.exceptions import ConfigurationError, OutputError


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of ``validate_ensemble``.

    ``violation`` holds the first 1-based world pair (n, n+1) with
    x_n >= x_{n+1}; ``nonfinite`` the 1-based worlds with NaN or inf entries.
    """

    passed: bool
    message: str
    violation: Optional[Tuple[int, int]] = None
    nonfinite: Tuple[int, ...] = ()
    details: Dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed


def first_order_violation(positions: np.ndarray) -> Optional[Tuple[int, int]]:
    """1-based pair of the first non-increasing neighbours, or None."""
    bad = np.flatnonzero(~(np.diff(positions) > 0))
    if bad.size == 0:
        return None
    n = int(bad[0]) + 1
    return (n, n + 1)


def validate_ensemble(ensemble: Union[WorldEnsemble, np.ndarray]) -> ValidityReport:
    """Check strict ordering and finiteness of an ensemble.

    Never raises; the result reports the first problem found.

    Examples:
        >>> validate_ensemble([0.0, 2.0, 1.0]).violation
        (2, 3)
    """
    positions = as_positions(ensemble)
    finite = np.isfinite(positions)
    if isinstance(ensemble, WorldEnsemble):
        finite &= np.isfinite(ensemble.momenta)

    if not finite.all():
        nonfinite = tuple(int(i) + 1 for i in np.flatnonzero(~finite))
        return ValidityReport(
            passed=False,
            message=f"Non-finite entries at world(s) {', '.join(map(str, nonfinite))}",
            nonfinite=nonfinite,
        )

    violation = first_order_violation(positions)
    if violation is not None:
        n, m = violation
        return ValidityReport(
            passed=False,
            message=(
                f"Worlds {n} and {m} are not strictly ordered "
                f"(x_{n}={positions[n - 1]!r}, x_{m}={positions[m - 1]!r})"
            ),
            violation=violation,
            details={"positions": (float(positions[n - 1]), float(positions[m - 1]))},
        )

    return ValidityReport(passed=True, message="Ok")


def validate_positive(name: str, value: Any, integer: bool = False) -> None:
    """Raise ConfigurationError unless ``value`` is a positive number.

    Raises:
        ConfigurationError: If value is missing, non-numeric or not positive
    """
    kinds = (int, np.integer) if integer else (int, float, np.integer, np.floating)
    if isinstance(value, bool) or not isinstance(value, kinds) or not value > 0:
        kind = "integer" if integer else "number"
        raise ConfigurationError(f"{name} must be a positive {kind}, got {value!r}")
    if not integer and not np.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")


def validate_output_path(output_path: Path, overwrite: bool = True) -> None:
    """Validate an output file path and check for overwrites.

    Args:
        output_path: Path for output file
        overwrite: Whether to allow overwriting existing files

    Raises:
        OutputError: If the path is a directory, or exists and overwrite is False
    """
    if output_path.is_dir():
        raise OutputError(f"Output path is a directory: {output_path}")

    if output_path.exists() and not overwrite:
        raise OutputError(
            f"Output file already exists: {output_path}. "
            "Use --overwrite to overwrite existing files."
        )
