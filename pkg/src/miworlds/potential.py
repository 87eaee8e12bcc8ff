"""Interworld potentials and their analytic forces.

Three families are provided, all scaled by hbar^2 / 8m:

- toy: sum of squared differences of reciprocal neighbour gaps
- rational smoothing: squared ratio of stencil estimates of the second and
  first derivatives of the inverse CDF
- equivariance: squared log-derivative of a cubic density fitted to five
  neighbouring worlds under equal-area constraints

Positions are plain arrays; world indices in messages are 1-based.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console

from miworlds.core import PhysicalParams, as_positions
from miworlds.exceptions import (
    ConfigurationError,
    DomainError,
    EnsembleSizeError,
    NonPositiveDensityError,
    SingularityError,
    SingularSystemError,
)
from miworlds.stencil import (
    OffsetSet,
    StencilCoefficients,
    build_stencil,
    default_offsets,
    one_sided_offsets,
)

console = Console(stderr=True)

EQUIVARIANCE_WIDTH = 5
CONDITIONING_THRESHOLD = 1e-12

_warned: set = set()


def _warn_once(key, message: str) -> None:
    if key in _warned:
        return
    _warned.add(key)
    console.print(f"[yellow]Warning: {message}[/yellow]")


class PotentialKind(str, Enum):
    TOY = "toy"
    RATIONAL = "rational"
    EQUIVARIANCE = "equivariance"


class EdgePolicy(str, Enum):
    """How worlds without a full neighbourhood contribute."""

    SKIP = "skip"
    ONE_SIDED = "one-sided"


@dataclass(frozen=True)
class PotentialSpec:
    """Which interworld potential to use and how it treats the edges."""

    kind: PotentialKind
    stencil: Optional[StencilCoefficients] = None
    edge_policy: EdgePolicy = EdgePolicy.SKIP

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", PotentialKind(self.kind))
            object.__setattr__(self, "edge_policy", EdgePolicy(self.edge_policy))
        except ValueError as e:
            raise ConfigurationError(f"Invalid potential specification: {e}")

        if self.kind is PotentialKind.RATIONAL:
            if self.stencil is None:
                raise ConfigurationError("A rational-smoothing potential needs a stencil")
            if not self.stencil.offsets.is_symmetric:
                raise ConfigurationError(
                    f"Rational smoothing needs a symmetric offset set, got "
                    f"{self.stencil.offsets.offsets}; odd or lopsided sets break "
                    "left-right symmetry"
                )

    @classmethod
    def toy(cls) -> "PotentialSpec":
        return cls(PotentialKind.TOY)

    @classmethod
    def rational(
        cls,
        order: int,
        offsets: Optional[OffsetSet] = None,
        edge_policy: EdgePolicy = EdgePolicy.SKIP,
    ) -> "PotentialSpec":
        stencil = build_stencil(offsets or default_offsets(order), order)
        return cls(PotentialKind.RATIONAL, stencil, edge_policy)

    @classmethod
    def equivariance(cls, edge_policy: EdgePolicy = EdgePolicy.SKIP) -> "PotentialSpec":
        return cls(PotentialKind.EQUIVARIANCE, edge_policy=edge_policy)

    @property
    def label(self) -> str:
        if self.kind is PotentialKind.RATIONAL:
            return f"rational(L={self.stencil.order}, offsets={list(self.stencil.offsets)})"
        return self.kind.value

    @property
    def reach(self) -> int:
        """How far a single potential term looks from its world."""
        if self.kind is PotentialKind.TOY:
            return 1
        if self.kind is PotentialKind.RATIONAL:
            return self.stencil.offsets.reach
        return EQUIVARIANCE_WIDTH // 2

    @property
    def interaction_width(self) -> int:
        """Largest |n - m| for which world m's position enters the force on n."""
        return 2 * self.reach


def _gaps(x: np.ndarray) -> np.ndarray:
    gaps = np.diff(x)
    bad = np.flatnonzero(~(gaps > 0))
    if bad.size:
        n = int(bad[0]) + 1
        raise SingularityError(
            f"Worlds {n} and {n + 1} coincide or are out of order "
            f"(gap {gaps[bad[0]]!r}); interworld potential diverges",
            world=n,
        )
    return gaps


# =============================================================================
# TOY POTENTIAL
# =============================================================================

def _toy_terms(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gaps = _gaps(x)
    # Reciprocal gaps with the infinite boundary gaps contributing zero
    inv = np.concatenate([[0.0], 1.0 / gaps, [0.0]])
    return gaps, np.diff(inv)


def toy_potential(ensemble, params: PhysicalParams) -> float:
    """hbar^2/8m * sum_n (1/(x_{n+1}-x_n) - 1/(x_n-x_{n-1}))^2 with x_0 = -inf, x_{N+1} = +inf.

    Examples:
        >>> toy_potential([0.0, 1.0, 2.0], PhysicalParams())
        0.25
    """
    x = as_positions(ensemble)
    _, d = _toy_terms(x)
    return float(params.interworld_prefactor * np.sum(d * d))


def toy_force(ensemble, params: PhysicalParams) -> np.ndarray:
    """-dU_toy/dx_n for every world."""
    x = as_positions(ensemble)
    gaps, d = _toy_terms(x)
    grad = np.zeros_like(x)
    if x.size > 1:
        dU_dgap = -2.0 * params.interworld_prefactor * (d[:-1] - d[1:]) / gaps**2
        grad[1:] += dU_dgap
        grad[:-1] -= dU_dgap
    return -grad


# =============================================================================
# RATIONAL SMOOTHING POTENTIAL
# =============================================================================

def _rational_groups(
    n_worlds: int, stencil: StencilCoefficients, edge_policy: EdgePolicy
) -> List[Tuple[np.ndarray, StencilCoefficients]]:
    """World indices (0-based) paired with the stencil their term uses."""
    size = len(stencil.offsets)
    if n_worlds < size + 1:
        raise EnsembleSizeError(
            f"Rational smoothing with {size} offsets needs at least {size + 1} worlds, "
            f"got {n_worlds}"
        )

    left = stencil.offsets.left_reach
    right = stencil.offsets.right_reach
    groups = [(np.arange(left, n_worlds - right), stencil)]

    if edge_policy is EdgePolicy.ONE_SIDED:
        edge_worlds = list(range(0, left)) + list(range(n_worlds - right, n_worlds))
        for n in edge_worlds:
            offsets = one_sided_offsets(n, n_worlds - 1 - n, size)
            groups.append((np.array([n]), build_stencil(offsets, stencil.order)))
    return groups


def _rational_group_terms(x: np.ndarray, idx: np.ndarray, stencil: StencilCoefficients):
    """Per-world energies and the pieces needed for the gradient."""
    neighbours = idx[:, None] + stencil.offset_array[None, :]
    diffs = x[neighbours] - x[idx][:, None]
    first = diffs @ stencil.weights(1)
    second = diffs @ stencil.weights(2)

    bad = np.flatnonzero(~(first > 0))
    if bad.size:
        n = int(idx[bad[0]]) + 1
        raise SingularityError(
            f"Rational-smoothing denominator is {first[bad[0]]!r} at world {n}; "
            "the ensemble has collapsed or is too coarse",
            world=n,
        )

    scale = np.max(np.abs(diffs), axis=1)
    weak = np.flatnonzero(first < CONDITIONING_THRESHOLD * scale)
    if weak.size:
        n = int(idx[weak[0]]) + 1
        _warn_once(
            ("rational", n),
            f"rational-smoothing denominator at world {n} is below "
            f"{CONDITIONING_THRESHOLD:g} of the local gap scale",
        )

    ratio = second / first**2
    return neighbours, first, second, ratio


def rational_terms(
    ensemble,
    stencil: StencilCoefficients,
    params: PhysicalParams,
    edge_policy: EdgePolicy = EdgePolicy.SKIP,
) -> np.ndarray:
    """Per-world contributions U_n (zero for skipped boundary worlds)."""
    x = as_positions(ensemble)
    terms = np.zeros_like(x)
    for idx, group_stencil in _rational_groups(x.size, stencil, edge_policy):
        if idx.size == 0:
            continue
        _, _, _, ratio = _rational_group_terms(x, idx, group_stencil)
        terms[idx] = params.interworld_prefactor * ratio**2
    return terms


def rational_potential(
    ensemble,
    stencil: StencilCoefficients,
    params: PhysicalParams,
    edge_policy: EdgePolicy = EdgePolicy.SKIP,
) -> float:
    """hbar^2/8m * sum_n (A2_n / A1_n^2)^2 with A_l = sum_c alpha[c, l] (x_{n+c} - x_n).

    Raises:
        SingularityError: If some A1_n is not positive
        EnsembleSizeError: If N < C + 1
    """
    return float(np.sum(rational_terms(ensemble, stencil, params, edge_policy)))


def rational_force(
    ensemble,
    stencil: StencilCoefficients,
    params: PhysicalParams,
    edge_policy: EdgePolicy = EdgePolicy.SKIP,
) -> np.ndarray:
    """-dU/dx_m, accumulated term by term over every world whose stencil touches m."""
    x = as_positions(ensemble)
    K = params.interworld_prefactor
    grad = np.zeros_like(x)
    for idx, group_stencil in _rational_groups(x.size, stencil, edge_policy):
        if idx.size == 0:
            continue
        neighbours, first, second, ratio = _rational_group_terms(x, idx, group_stencil)
        dU_dfirst = -4.0 * K * ratio * second / first**3
        dU_dsecond = 2.0 * K * ratio / first**2
        per_offset = (
            dU_dfirst[:, None] * group_stencil.weights(1)[None, :]
            + dU_dsecond[:, None] * group_stencil.weights(2)[None, :]
        )
        np.add.at(grad, neighbours, per_offset)
        np.add.at(grad, idx, -per_offset.sum(axis=1))
    return -grad


# =============================================================================
# EQUIVARIANCE POTENTIAL
# =============================================================================

@dataclass(frozen=True)
class EquivarianceCoefficients:
    """Cubic density P(x) = a + b s + c s^2 + d s^3 with s = x - center.

    ``center`` is the position of the world the fit belongs to, so ``a`` is
    the fitted density there and ``b / a`` its log-derivative.
    """

    a: float
    b: float
    c: float
    d: float
    center: float = 0.0

    @property
    def local(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def density(self, x) -> np.ndarray:
        s = np.asarray(x, dtype=float) - self.center
        return np.polynomial.polynomial.polyval(s, self.local)

    def integral(self, lo: float, hi: float) -> float:
        antiderivative = np.polynomial.Polynomial(self.local).integ()
        return float(antiderivative(hi - self.center) - antiderivative(lo - self.center))

    def global_coefficients(self) -> np.ndarray:
        """(a, b, c, d) of the same cubic written in powers of x."""
        shifted = np.polynomial.Polynomial(self.local)(np.polynomial.Polynomial([-self.center, 1.0]))
        coef = shifted.coef[:4]
        return np.pad(coef, (0, 4 - coef.size))


def _equivariance_windows(
    n_worlds: int, edge_policy: EdgePolicy
) -> Tuple[np.ndarray, np.ndarray]:
    """(worlds, window starts), both 0-based."""
    if n_worlds < EQUIVARIANCE_WIDTH:
        raise EnsembleSizeError(
            f"The equivariance potential needs at least {EQUIVARIANCE_WIDTH} worlds, "
            f"got {n_worlds}"
        )
    half = EQUIVARIANCE_WIDTH // 2
    if edge_policy is EdgePolicy.SKIP:
        worlds = np.arange(half, n_worlds - half)
    else:
        worlds = np.arange(n_worlds)
    starts = np.clip(worlds - half, 0, n_worlds - EQUIVARIANCE_WIDTH)
    return worlds, starts


def _equivariance_solve(x: np.ndarray, worlds: np.ndarray, starts: np.ndarray, n_total: int):
    window = starts[:, None] + np.arange(EQUIVARIANCE_WIDTH)[None, :]
    local = x[window] - x[worlds][:, None]
    powers = np.arange(1, 5)
    moments = local[:, :, None] ** powers
    # K[i, k] = integral of s^k between worlds i and i+1 of the window
    system = (moments[:, 1:, :] - moments[:, :-1, :]) / powers
    rhs = np.full((worlds.size, 4, 1), 1.0 / n_total)
    try:
        beta = np.linalg.solve(system, rhs)[:, :, 0]
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "Equal-area system is singular for some five-world neighbourhood"
        )
    if not np.all(np.isfinite(beta)):
        raise SingularSystemError(
            "Equal-area system produced non-finite coefficients"
        )
    return window, local, system, beta


def equivariance_coefficients(ensemble, n: int, n_worlds: Optional[int] = None) -> EquivarianceCoefficients:
    """Fit the cubic density around world n (1-based, 3 <= n <= N-2).

    The four integrals of P between consecutive worlds n-2 .. n+2 are set
    to 1/N.

    Raises:
        DomainError: If world n has no full five-world neighbourhood
        SingularSystemError: If the equal-area system is singular
    """
    x = as_positions(ensemble)
    n_total = n_worlds if n_worlds is not None else x.size
    if not 3 <= n <= x.size - 2:
        raise DomainError(
            f"World {n} has no five-world neighbourhood in an ensemble of {x.size}"
        )
    worlds = np.array([n - 1])
    _, _, _, beta = _equivariance_solve(x, worlds, worlds - 2, n_total)
    a, b, c, d = (float(v) for v in beta[0])
    return EquivarianceCoefficients(a, b, c, d, center=float(x[n - 1]))


def _equivariance_terms(x: np.ndarray, edge_policy: EdgePolicy):
    _gaps(x)
    worlds, starts = _equivariance_windows(x.size, edge_policy)
    window, local, system, beta = _equivariance_solve(x, worlds, starts, x.size)
    bad = np.flatnonzero(~(beta[:, 0] > 0))
    if bad.size:
        n = int(worlds[bad[0]]) + 1
        raise NonPositiveDensityError(
            f"Fitted density at world {n} is {beta[bad[0], 0]!r}; it must be positive",
            world=n,
        )
    return worlds, window, local, system, beta


def equivariance_terms(
    ensemble, params: PhysicalParams, edge_policy: EdgePolicy = EdgePolicy.SKIP
) -> np.ndarray:
    """Per-world contributions hbar^2/8m (P'(x_n)/P(x_n))^2."""
    x = as_positions(ensemble)
    worlds, _, _, _, beta = _equivariance_terms(x, edge_policy)
    terms = np.zeros_like(x)
    terms[worlds] = params.interworld_prefactor * (beta[:, 1] / beta[:, 0]) ** 2
    return terms


def equivariance_potential(
    ensemble, params: PhysicalParams, edge_policy: EdgePolicy = EdgePolicy.SKIP
) -> float:
    """Sum over worlds of hbar^2/8m times the squared log-derivative of the fitted cubic.

    Raises:
        NonPositiveDensityError: If a fitted density is not positive at its world
        SingularSystemError: If an equal-area system is singular
        EnsembleSizeError: If N < 5
    """
    return float(np.sum(equivariance_terms(ensemble, params, edge_policy)))


def equivariance_force(
    ensemble, params: PhysicalParams, edge_policy: EdgePolicy = EdgePolicy.SKIP
) -> np.ndarray:
    """Exact gradient through the equal-area solve.

    With K beta = 1/N and U_n depending on beta only, dU/ds_j = -lambda^T
    (dK/ds_j) beta where K^T lambda = dU/dbeta. Moving window boundary s_j
    changes row j-1 by +P(s_j) and row j by -P(s_j).
    """
    x = as_positions(ensemble)
    K = params.interworld_prefactor
    worlds, window, local, system, beta = _equivariance_terms(x, edge_policy)

    b0, b1 = beta[:, 0], beta[:, 1]
    dU_dbeta = np.zeros_like(beta)
    dU_dbeta[:, 0] = -2.0 * K * b1**2 / b0**3
    dU_dbeta[:, 1] = 2.0 * K * b1 / b0**2
    adjoint = np.linalg.solve(np.transpose(system, (0, 2, 1)), dU_dbeta[:, :, None])[:, :, 0]

    density_at = np.einsum("mjk,mk->mj", local[:, :, None] ** np.arange(4), beta)
    padded = np.zeros((worlds.size, EQUIVARIANCE_WIDTH + 1))
    padded[:, 1:EQUIVARIANCE_WIDTH] = adjoint
    dU_dlocal = -density_at * (padded[:, :-1] - padded[:, 1:])

    grad = np.zeros_like(x)
    np.add.at(grad, window, dU_dlocal)
    np.add.at(grad, worlds, -dU_dlocal.sum(axis=1))
    return -grad


# =============================================================================
# POTENTIAL OBJECTS
# =============================================================================

class InterworldPotential(ABC):
    """An interworld potential bound to its physical constants."""

    def __init__(self, spec: PotentialSpec, params: PhysicalParams):
        self.spec = spec
        self.params = params

    @abstractmethod
    def energy(self, positions) -> float:
        pass

    @abstractmethod
    def forces(self, positions) -> np.ndarray:
        pass

    def terms(self, positions) -> np.ndarray:
        """Per-world energy contributions."""
        raise NotImplementedError

    @property
    def interaction_width(self) -> int:
        return self.spec.interaction_width

    @property
    def reach(self) -> int:
        return self.spec.reach

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec.label})"


class ToyPotential(InterworldPotential):
    def energy(self, positions) -> float:
        return toy_potential(positions, self.params)

    def forces(self, positions) -> np.ndarray:
        return toy_force(positions, self.params)

    def terms(self, positions) -> np.ndarray:
        _, d = _toy_terms(as_positions(positions))
        return self.params.interworld_prefactor * d * d


class RationalPotential(InterworldPotential):
    def energy(self, positions) -> float:
        return rational_potential(positions, self.spec.stencil, self.params, self.spec.edge_policy)

    def forces(self, positions) -> np.ndarray:
        return rational_force(positions, self.spec.stencil, self.params, self.spec.edge_policy)

    def terms(self, positions) -> np.ndarray:
        return rational_terms(positions, self.spec.stencil, self.params, self.spec.edge_policy)


class EquivariancePotential(InterworldPotential):
    def energy(self, positions) -> float:
        return equivariance_potential(positions, self.params, self.spec.edge_policy)

    def forces(self, positions) -> np.ndarray:
        return equivariance_force(positions, self.params, self.spec.edge_policy)

    def terms(self, positions) -> np.ndarray:
        return equivariance_terms(positions, self.params, self.spec.edge_policy)


POTENTIAL_REGISTRY: Dict[PotentialKind, type] = {
    PotentialKind.TOY: ToyPotential,
    PotentialKind.RATIONAL: RationalPotential,
    PotentialKind.EQUIVARIANCE: EquivariancePotential,
}


def build_potential(spec: PotentialSpec, params: PhysicalParams) -> InterworldPotential:
    """Instantiate the registered potential class for ``spec.kind``."""
    return POTENTIAL_REGISTRY[spec.kind](spec, params)


# =============================================================================
# EXTERNAL POTENTIAL
# =============================================================================

@dataclass(frozen=True)
class ExternalPotential:
    """Either no external field (omega None) or V(x) = m omega^2 x^2 / 2."""

    omega: Optional[float] = None

    def __post_init__(self):
        if self.omega is not None and not self.omega > 0:
            raise ConfigurationError(f"Harmonic omega must be positive, got {self.omega!r}")

    @classmethod
    def none(cls) -> "ExternalPotential":
        return cls(None)

    @classmethod
    def harmonic(cls, omega: float) -> "ExternalPotential":
        return cls(float(omega))

    @property
    def is_harmonic(self) -> bool:
        return self.omega is not None

    def energy(self, positions, mass: float) -> float:
        if self.omega is None:
            return 0.0
        x = as_positions(positions)
        return float(0.5 * mass * self.omega**2 * np.sum(x * x))

    def forces(self, positions, mass: float) -> np.ndarray:
        x = as_positions(positions)
        if self.omega is None:
            return np.zeros_like(x)
        return -mass * self.omega**2 * x
