"""Domain types and unit conventions for miworlds.

All dynamics run in the oscillator frame whose coordinates are the
dimensionless position X = sqrt(2 m omega / hbar) x and the dimensionless
time T = omega t / (2 pi). Rewriting the Hamiltonian in X and T gives the
same functional form with m = 1, omega = 2 pi and hbar = 2 m omega = 4 pi;
in that frame the ground-state density is the unit-variance Gaussian and
T = 1 is one oscillator period.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from miworlds.exceptions import ConfigurationError

ArrayLike = Union[Sequence[float], np.ndarray]

FRAME_MASS = 1.0
FRAME_OMEGA = 2.0 * math.pi
FRAME_HBAR = 2.0 * FRAME_MASS * FRAME_OMEGA


@dataclass(frozen=True)
class PhysicalParams:
    """Particle mass, reduced Planck constant and oscillator frequency."""

    mass: float = 1.0
    hbar: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("mass", "hbar", "omega"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(
                    f"PhysicalParams.{name} must be a positive finite number, got {value!r}"
                )

    @classmethod
    def dimensionless(cls) -> "PhysicalParams":
        """Constants of the (X, T) frame: m = 1, hbar = 4 pi, omega = 2 pi."""
        return cls(mass=FRAME_MASS, hbar=FRAME_HBAR, omega=FRAME_OMEGA)

    @property
    def interworld_prefactor(self) -> float:
        """hbar^2 / 8m, the common prefactor of every interworld potential."""
        return self.hbar**2 / (8.0 * self.mass)

    @property
    def ground_state_energy(self) -> float:
        return 0.5 * self.hbar * self.omega


class UnitSystem(str, Enum):
    """How user-facing quantities are expressed."""

    DIMENSIONLESS = "dimensionless"
    PHYSICAL = "physical"

    def output_params(self, params: PhysicalParams) -> Optional[PhysicalParams]:
        """Constants for converting written results, or None to keep (X, T) units.

        Runs always integrate in the dimensionless frame; only the result
        files change with the unit system.
        """
        if self is UnitSystem.DIMENSIONLESS:
            return None
        return params


@dataclass(frozen=True, eq=False)
class WorldEnsemble:
    """Positions, momenta and pinned mask of N worlds.

    Arrays are copied and frozen on construction. Ordering is not enforced
    here so that ``validate_ensemble`` can report on arbitrary input.
    """

    positions: np.ndarray
    momenta: np.ndarray = None
    pinned: np.ndarray = None

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).ravel()
        if positions.size < 1:
            raise ConfigurationError("A world ensemble needs at least one world")

        if self.momenta is None:
            momenta = np.zeros_like(positions)
        else:
            momenta = np.array(self.momenta, dtype=float).ravel()
        if self.pinned is None:
            pinned = np.zeros(positions.size, dtype=bool)
        else:
            pinned = np.array(self.pinned, dtype=bool).ravel()

        if momenta.size != positions.size or pinned.size != positions.size:
            raise ConfigurationError(
                f"Ensemble arrays differ in length: positions={positions.size}, "
                f"momenta={momenta.size}, pinned={pinned.size}"
            )

        for arr in (positions, momenta, pinned):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "momenta", momenta)
        object.__setattr__(self, "pinned", pinned)

    def __len__(self) -> int:
        return self.positions.size

    @property
    def n_worlds(self) -> int:
        return self.positions.size

    def with_state(
        self, positions: ArrayLike, momenta: Optional[ArrayLike] = None
    ) -> "WorldEnsemble":
        """Copy with new positions (and momenta), keeping the pinned mask."""
        return WorldEnsemble(
            positions=positions,
            momenta=self.momenta if momenta is None else momenta,
            pinned=self.pinned,
        )

    def with_pinned(self, pinned: ArrayLike) -> "WorldEnsemble":
        return WorldEnsemble(self.positions, self.momenta, pinned)

    def pin_edges(self, left: int, right: int) -> "WorldEnsemble":
        """Pin ``left`` worlds at the low end and ``right`` at the high end."""
        if left < 0 or right < 0 or left + right >= self.n_worlds:
            raise ConfigurationError(
                f"Cannot pin {left} + {right} boundary worlds of an ensemble of "
                f"{self.n_worlds}; at least one world must stay free"
            )
        pinned = np.zeros(self.n_worlds, dtype=bool)
        pinned[:left] = True
        if right:
            pinned[self.n_worlds - right:] = True
        return self.with_pinned(pinned)

    def subset(self, start: int, stop: int) -> "WorldEnsemble":
        """Worlds ``start`` .. ``stop - 1`` (0-based slice) as a new ensemble."""
        return WorldEnsemble(
            self.positions[start:stop], self.momenta[start:stop], self.pinned[start:stop]
        )

    def scaled(self, factor: float) -> "WorldEnsemble":
        return self.with_state(self.positions * factor)

    def shifted(self, offset: float) -> "WorldEnsemble":
        return self.with_state(self.positions + offset)


def as_positions(ensemble: Union[WorldEnsemble, ArrayLike]) -> np.ndarray:
    """Position array of an ensemble or of a plain position sequence."""
    if isinstance(ensemble, WorldEnsemble):
        return ensemble.positions
    return np.asarray(ensemble, dtype=float).ravel()


# =============================================================================
# UNIT CONVERSIONS
# =============================================================================

def _scale(value, factor: float):
    if np.isscalar(value):
        return factor * float(value)
    return factor * np.asarray(value, dtype=float)


def _length_scale(params: PhysicalParams) -> float:
    return math.sqrt(2.0 * params.mass * params.omega / params.hbar)


def to_dimensionless(x, params: PhysicalParams):
    """Physical position to X = sqrt(2 m omega / hbar) x.

    Examples:
        >>> round(to_dimensionless(1.0, PhysicalParams(1.0, 1.0, 1.0)), 8)
        1.41421356
    """
    return _scale(x, _length_scale(params))


def from_dimensionless(X, params: PhysicalParams):
    """Inverse of ``to_dimensionless``."""
    return _scale(X, 1.0 / _length_scale(params))


def to_dimensionless_time(t, params: PhysicalParams):
    """Physical time to T = omega t / (2 pi); T = 1 is one period."""
    return _scale(t, params.omega / (2.0 * math.pi))


def from_dimensionless_time(T, params: PhysicalParams):
    return _scale(T, 2.0 * math.pi / params.omega)


def momentum_from_dimensionless(P, params: PhysicalParams):
    """Frame momentum dX/dT (m = 1) to physical momentum m dx/dt."""
    return _scale(P, math.sqrt(params.mass * params.hbar * params.omega / 2.0) / (2.0 * math.pi))


def energy_from_dimensionless(E, params: PhysicalParams):
    """Frame energy to physical energy; the frame ground energy 4 pi^2 maps to hbar omega / 2."""
    return _scale(E, params.hbar * params.omega / (8.0 * math.pi**2))
