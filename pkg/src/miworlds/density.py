"""Harmonic-oscillator eigenstate densities and equal-area world sampling.

Densities are expressed in the dimensionless coordinate X, where the
ground state is the standard normal density and the first excited state
is X^2 times it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np
from scipy import integrate, optimize, special

from miworlds.core import PhysicalParams, WorldEnsemble
from miworlds.exceptions import ConfigurationError, DomainError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Root search tolerances in X; CDF agreement is checked against INVERSE_CDF_TOL
_XTOL = 1e-15
_RTOL = 4.0 * np.finfo(float).eps
INVERSE_CDF_TOL = 1e-12


class DensityKind(str, Enum):
    """Eigenstates supported by ``DensityModel``."""

    HARMONIC_GROUND = "ground"
    HARMONIC_FIRST_EXCITED = "excited"


@dataclass(frozen=True)
class DensityModel:
    """An eigenstate probability density with its CDF and force oracle."""

    kind: DensityKind
    params: PhysicalParams = field(default_factory=PhysicalParams.dimensionless)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", DensityKind(self.kind))
        except ValueError:
            choices = ", ".join(k.value for k in DensityKind)
            raise ConfigurationError(
                f"Unknown density model '{self.kind}'. Available models: {choices}"
            )

    @property
    def has_node(self) -> bool:
        return self.kind is DensityKind.HARMONIC_FIRST_EXCITED

    @classmethod
    def ground(cls) -> "DensityModel":
        return cls(DensityKind.HARMONIC_GROUND)

    @classmethod
    def excited(cls) -> "DensityModel":
        return cls(DensityKind.HARMONIC_FIRST_EXCITED)


def _gaussian(X):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(X))


def density_eval(model: DensityModel, x):
    """Probability density at dimensionless position(s) x.

    Examples:
        >>> round(float(density_eval(DensityModel.ground(), 0.0)), 8)
        0.39894228
    """
    X = np.asarray(x, dtype=float)
    value = _gaussian(X)
    if model.kind is DensityKind.HARMONIC_FIRST_EXCITED:
        value = np.square(X) * value
    return value if value.ndim else float(value)


def cdf_eval(model: DensityModel, x):
    """Cumulative probability C(x) in closed form.

    The excited-state CDF is Phi(X) - X phi(X), obtained by integrating
    X^2 phi(X) by parts.
    """
    X = np.asarray(x, dtype=float)
    value = special.ndtr(X)
    if model.kind is DensityKind.HARMONIC_FIRST_EXCITED:
        with np.errstate(invalid="ignore"):
            tail = np.where(np.isfinite(X), X * _gaussian(X), 0.0)
        value = value - tail
    return value if value.ndim else float(value)


def inverse_cdf(model: DensityModel, u: float) -> float:
    """Position x with C(x) = u, for 0 < u < 1.

    A bracket is grown around the origin until it contains the root, the
    root is located with Brent's method, and Newton steps polish it while
    they reduce |C(x) - u|.

    Raises:
        DomainError: If u is not strictly between 0 and 1
    """
    u = float(u)
    if not 0.0 < u < 1.0:
        raise DomainError(f"inverse_cdf needs 0 < u < 1, got {u!r}")

    # Both supported densities are even
    if u == 0.5:
        return 0.0

    def residual(X: float) -> float:
        return cdf_eval(model, X) - u

    lo, hi = -1.0, 1.0
    while residual(lo) > 0.0:
        lo *= 2.0
        if lo < -1e3:
            raise DomainError(f"No finite quantile for u={u!r}")
    while residual(hi) < 0.0:
        hi *= 2.0
        if hi > 1e3:
            raise DomainError(f"No finite quantile for u={u!r}")

    x = optimize.brentq(residual, lo, hi, xtol=_XTOL, rtol=_RTOL, maxiter=500)

    err = abs(residual(x))
    for _ in range(3):
        p = density_eval(model, x)
        if err == 0.0 or p <= 0.0:
            break
        candidate = x - residual(x) / p
        candidate_err = abs(residual(candidate))
        if candidate_err >= err:
            break
        x, err = candidate, candidate_err

    return float(x)


def sample_worlds(model: DensityModel, n_worlds: int) -> WorldEnsemble:
    """Equal-area ensemble: x_n = C^-1((n - 1/2) / N), momenta zero, none pinned.

    The upper half mirrors the lower half (x_{N+1-n} = -x_n), which is exact
    for the even densities supported here.

    Raises:
        DomainError: For N < 1, or odd N with the excited state (the middle
            world would sit on the node)
    """
    if isinstance(n_worlds, bool) or not isinstance(n_worlds, (int, np.integer)) or n_worlds < 1:
        raise DomainError(f"World count must be a positive integer, got {n_worlds!r}")
    if model.has_node and n_worlds % 2:
        raise DomainError(
            f"The first excited state needs an even world count (got N={n_worlds}); "
            "an odd count would place the middle world on the node at x=0"
        )

    half = n_worlds // 2
    lower = np.array(
        [inverse_cdf(model, (n - 0.5) / n_worlds) for n in range(1, half + 1)], dtype=float
    )
    middle = np.zeros(n_worlds % 2)
    positions = np.concatenate([lower, middle, -lower[::-1]])
    return WorldEnsemble(positions=positions)


def bohmian_force_oracle(model: DensityModel, x) -> Union[float, np.ndarray]:
    """Exact quantum force +m omega^2 x on a stationary world at x.

    For a real eigenstate the quantum potential is E - V(x), so the force
    it exerts is +V'(x), cancelling the harmonic force.

    Raises:
        DomainError: If any x lies on the excited-state node
    """
    X = np.asarray(x, dtype=float)
    if model.has_node and np.any(X == 0.0):
        raise DomainError("The Bohmian force is undefined on the node at x=0")
    force = model.params.mass * model.params.omega**2 * X
    return force if force.ndim else float(force)


def equal_area_masses(model: DensityModel, positions) -> np.ndarray:
    """Quadrature of the density between consecutive positions."""
    x = np.asarray(positions, dtype=float)
    masses = np.empty(max(x.size - 1, 0))
    for i in range(masses.size):
        masses[i], _ = integrate.quad(
            lambda q: density_eval(model, q), x[i], x[i + 1], epsabs=1e-15, epsrel=1e-13
        )
    return masses
