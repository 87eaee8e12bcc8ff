"""Rational-smoothing stencils.

A stencil holds the coefficients alpha[c, l] with

    sum_c alpha[c, l] * c**k = l! * delta(l, k)     for l, k in 1..L

so that sum_c alpha[c, l] * (x_{n+c} - x_n) approximates the l-th derivative
of the inverse CDF (times N**-l) at world n. In matrix form M A = D with
M[l, c] = c**l and D = diag(1!, ..., L!).
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Tuple

import numpy as np
import sympy

from miworlds.exceptions import (
    ConfigurationError,
    EnsembleSizeError,
    SingularSystemError,
    StencilOrderError,
    UnderdeterminedStencilError,
)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class OffsetSet:
    """Ordered, distinct, nonzero neighbour offsets c."""

    offsets: Tuple[int, ...]

    def __post_init__(self):
        values = []
        for c in self.offsets:
            if isinstance(c, bool) or int(c) != c:
                raise ConfigurationError(f"Stencil offsets must be integers, got {c!r}")
            values.append(int(c))
        if not values:
            raise ConfigurationError("A stencil needs at least one offset")
        if 0 in values:
            raise ConfigurationError("Stencil offsets must be nonzero")
        if len(set(values)) != len(values):
            raise ConfigurationError(f"Stencil offsets must be distinct, got {tuple(values)}")
        object.__setattr__(self, "offsets", tuple(values))

    def __len__(self) -> int:
        return len(self.offsets)

    def __iter__(self):
        return iter(self.offsets)

    @property
    def is_symmetric(self) -> bool:
        return set(self.offsets) == {-c for c in self.offsets}

    @property
    def reach(self) -> int:
        """Largest |c|: how far a stencil term looks from its world."""
        return max(abs(c) for c in self.offsets)

    @property
    def left_reach(self) -> int:
        return max(0, -min(self.offsets))

    @property
    def right_reach(self) -> int:
        return max(0, max(self.offsets))

    @classmethod
    def symmetric(cls, half_width: int) -> "OffsetSet":
        """Offsets -h .. -1, 1 .. h in ascending order."""
        if half_width < 1:
            raise ConfigurationError(f"half_width must be at least 1, got {half_width}")
        return cls(tuple(range(-half_width, 0)) + tuple(range(1, half_width + 1)))


def default_offsets(order: int) -> OffsetSet:
    """Smallest symmetric offset set usable for order L: +-1 .. +-ceil(L/2)."""
    return OffsetSet.symmetric(max(1, math.ceil(order / 2)))


def one_sided_offsets(left_available: int, right_available: int, size: int) -> OffsetSet:
    """The ``size`` offsets closest to the world that stay inside the ensemble.

    Offsets are taken by increasing |c|, left before right, so a world one
    step in from the boundary gets (-1, 1, 2, 3) for size 4.

    Raises:
        EnsembleSizeError: If fewer than ``size`` neighbours exist
    """
    if left_available + right_available < size:
        raise EnsembleSizeError(
            f"Only {left_available + right_available} neighbours available, "
            f"stencil needs {size}"
        )
    chosen = []
    distance = 1
    while len(chosen) < size:
        if distance <= left_available:
            chosen.append(-distance)
        if len(chosen) < size and distance <= right_available:
            chosen.append(distance)
        distance += 1
    return OffsetSet(tuple(sorted(chosen)))


@dataclass(frozen=True, eq=False)
class StencilCoefficients:
    """C x L coefficient matrix alpha for an offset set.

    ``alpha`` rows follow ``offsets.offsets``; column l-1 holds the weights
    of the l-th derivative. ``rational`` keeps the exact entries when the
    stencil was built with exact arithmetic.
    """

    offsets: OffsetSet
    order: int
    alpha: np.ndarray
    rational: Optional[sympy.ImmutableMatrix] = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (len(self.offsets), self.order):
            raise ConfigurationError(
                f"alpha has shape {alpha.shape}, expected {(len(self.offsets), self.order)}"
            )
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def offset_array(self) -> np.ndarray:
        return np.asarray(self.offsets.offsets, dtype=np.intp)

    def weights(self, derivative: int) -> np.ndarray:
        """Column of alpha for the given derivative order (1-based)."""
        return self.alpha[:, derivative - 1]

    def perturbed(self, row: int, col: int, delta: float) -> "StencilCoefficients":
        alpha = self.alpha.copy()
        alpha[row, col] += delta
        return StencilCoefficients(self.offsets, self.order, alpha)


def _moment_matrix(offsets: Iterable[int], order: int) -> np.ndarray:
    c = np.asarray(tuple(offsets), dtype=float)
    powers = np.arange(1, order + 1, dtype=float)[:, None]
    return c[None, :] ** powers


def _factorials(order: int) -> np.ndarray:
    return np.array([math.factorial(l) for l in range(1, order + 1)], dtype=float)


@lru_cache(maxsize=128)
def _solve_exact(offsets: Tuple[int, ...], order: int) -> sympy.ImmutableMatrix:
    M = sympy.Matrix(order, len(offsets), lambda l, c: sympy.Integer(offsets[c]) ** (l + 1))
    if M.rank() < order:
        raise SingularSystemError(
            f"Moment matrix for offsets {offsets} has rank {M.rank()} < L={order}"
        )
    delta = sympy.diag(*[sympy.factorial(l) for l in range(1, order + 1)])
    if len(offsets) == order:
        A = M.LUsolve(delta)
    else:
        # Moore-Penrose minimum-norm solution
        A = M.T * (M * M.T).inv() * delta
    return sympy.ImmutableMatrix(A)


def _solve_float(offsets: Tuple[int, ...], order: int) -> np.ndarray:
    M = _moment_matrix(offsets, order)
    if np.linalg.matrix_rank(M) < order:
        raise SingularSystemError(
            f"Moment matrix for offsets {offsets} is rank deficient for L={order}"
        )
    delta = np.diag(_factorials(order))
    if len(offsets) == order:
        return np.linalg.solve(M, delta)
    return np.linalg.pinv(M) @ delta


def build_stencil(offsets, order: int, exact: bool = True) -> StencilCoefficients:
    """Solve M A = D for the stencil coefficients.

    Args:
        offsets: ``OffsetSet`` or a sequence of integer offsets
        order: Highest derivative L (at least 2)
        exact: Solve in rational arithmetic and convert; otherwise use a
            floating-point solve (pseudo-inverse when C > L)

    Returns:
        StencilCoefficients

    Raises:
        StencilOrderError: If L < 2
        UnderdeterminedStencilError: If C < L
        SingularSystemError: If M does not have full rank L

    Examples:
        >>> build_stencil((-1, 1), 2).alpha.tolist()
        [[-0.5, 1.0], [0.5, 1.0]]
    """
    if not isinstance(offsets, OffsetSet):
        offsets = OffsetSet(tuple(offsets))
    if isinstance(order, bool) or int(order) != order or order < 2:
        raise StencilOrderError(f"Stencil order must be an integer L >= 2, got {order!r}")
    order = int(order)
    if len(offsets) < order:
        raise UnderdeterminedStencilError(
            f"{len(offsets)} offsets cannot fix {order} derivative orders (need C >= L)"
        )

    if exact:
        rational = _solve_exact(offsets.offsets, order)
        alpha = np.array(rational.tolist(), dtype=float)
        return StencilCoefficients(offsets, order, alpha, rational)
    return StencilCoefficients(offsets, order, _solve_float(offsets.offsets, order))


def stencil_residual(stencil: StencilCoefficients) -> float:
    """max |M alpha - D| over all (l, l') pairs."""
    M = _moment_matrix(stencil.offsets, stencil.order)
    residual = M @ stencil.alpha - np.diag(_factorials(stencil.order))
    return float(np.max(np.abs(residual)))
