"""Custom exceptions for miworlds."""

from typing import Optional, Tuple


class MiwError(Exception):
    """Base exception for miworlds."""

    pass


class ConfigurationError(MiwError):
    """Invalid parameters or configuration file."""

    pass


class DomainError(MiwError):
    """Argument outside the domain of an operation."""

    pass


class StencilError(MiwError):
    """Error building rational-smoothing coefficients."""

    pass


class UnderdeterminedStencilError(StencilError):
    """Fewer offsets than derivative orders (C < L)."""

    pass


class SingularSystemError(StencilError):
    """Linear system without a unique solution."""

    pass


class StencilOrderError(StencilError):
    """Stencil order below 2."""

    pass


class EnsembleSizeError(MiwError):
    """Too few worlds for the requested potential."""

    pass


class SingularityError(MiwError):
    """Interworld potential diverges at the current configuration."""

    def __init__(self, message: str, world: Optional[int] = None):
        super().__init__(message)
        self.world = world
        # Partial trajectory attached by the integrator when a run aborts
        self.trajectory = None


class NonPositiveDensityError(SingularityError):
    """Fitted local density is not positive at a world."""

    pass


class CollapseError(MiwError):
    """World ordering broken during time evolution."""

    def __init__(self, message: str, step: int, pair: Tuple[int, int]):
        super().__init__(message)
        self.step = step
        self.pair = pair


class ScenarioError(MiwError):
    """Unknown scenario or invalid scenario overrides."""

    pass


class OutputError(MiwError):
    """Error writing result files."""

    pass
