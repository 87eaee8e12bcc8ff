"""miworlds - many interacting worlds simulation of a 1D quantum particle."""

__version__ = "0.1.0"
__author__ = "miworlds"

from miworlds.core import PhysicalParams, WorldEnsemble
from miworlds.density import DensityModel, sample_worlds
from miworlds.exceptions import MiwError
from miworlds.integrator import SimulationConfig, run
from miworlds.potential import PotentialSpec
from miworlds.scenarios import run_scenario
from miworlds.stencil import build_stencil

__all__ = [
    "PhysicalParams",
    "WorldEnsemble",
    "DensityModel",
    "sample_worlds",
    "MiwError",
    "SimulationConfig",
    "run",
    "PotentialSpec",
    "run_scenario",
    "build_stencil",
    "__version__",
]
