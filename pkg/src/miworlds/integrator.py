"""Velocity-Verlet time evolution of a world ensemble."""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from miworlds.core import (
    PhysicalParams,
    WorldEnsemble,
    energy_from_dimensionless,
    from_dimensionless,
    from_dimensionless_time,
    momentum_from_dimensionless,
)
from miworlds.exceptions import CollapseError, ConfigurationError, DomainError, SingularityError
from miworlds.potential import ExternalPotential, PotentialSpec, build_potential
from miworlds.validators import first_order_violation, validate_ensemble, validate_positive

StopCondition = Callable[[WorldEnsemble, float], Optional[str]]
RecordCallback = Callable[[int, float, WorldEnsemble], None]


@dataclass(frozen=True)
class SimulationConfig:
    """Potential, external field, time step and recording for one run."""

    potential: PotentialSpec
    dt: float
    steps: int
    external: ExternalPotential = field(default_factory=ExternalPotential.none)
    record_every: int = 1
    pinned_left: int = 0
    pinned_right: int = 0

    def __post_init__(self):
        validate_positive("dt", self.dt)
        validate_positive("steps", self.steps, integer=True)
        validate_positive("record_every", self.record_every, integer=True)
        for name in ("pinned_left", "pinned_right"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise ConfigurationError(f"{name} must be a nonnegative integer, got {value!r}")

    def pinned_mask(self, ensemble: WorldEnsemble) -> np.ndarray:
        """Ensemble's own pinned worlds plus the configured boundary worlds."""
        n = ensemble.n_worlds
        if self.pinned_left + self.pinned_right >= n:
            raise ConfigurationError(
                f"Cannot pin {self.pinned_left} + {self.pinned_right} boundary worlds "
                f"of an ensemble of {n}"
            )
        mask = ensemble.pinned.copy()
        mask[: self.pinned_left] = True
        if self.pinned_right:
            mask[n - self.pinned_right:] = True
        return mask


@dataclass(frozen=True)
class EnergyDecomposition:
    kinetic: float
    external: float
    interworld: float

    @property
    def total(self) -> float:
        return self.kinetic + self.external + self.interworld

    def as_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "external": self.external,
            "interworld": self.interworld,
            "total": self.total,
        }


@dataclass(frozen=True)
class CollapseEvent:
    """Ordering violation that ended a run."""

    step: int
    time: float
    pair: Tuple[int, int]
    message: str


@dataclass
class TrajectoryRecord:
    """Recorded snapshots of a run.

    ``failure`` is set when the run stopped on an ordering violation and
    ``stop_reason`` when a stop condition ended it early.
    """

    steps: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    snapshots: List[WorldEnsemble] = field(default_factory=list)
    energies: List[EnergyDecomposition] = field(default_factory=list)
    failure: Optional[CollapseEvent] = None
    stop_reason: Optional[str] = None

    def __len__(self) -> int:
        return len(self.snapshots)

    def append(self, step: int, time: float, state: WorldEnsemble, energy: EnergyDecomposition):
        self.steps.append(step)
        self.times.append(time)
        self.snapshots.append(state)
        self.energies.append(energy)

    @property
    def initial(self) -> WorldEnsemble:
        return self.snapshots[0]

    @property
    def final(self) -> WorldEnsemble:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.failure is None and self.stop_reason is None

    def positions(self) -> np.ndarray:
        """Snapshot-by-world position matrix."""
        return np.vstack([s.positions for s in self.snapshots])

    def world_positions(self, world: int) -> np.ndarray:
        """Position history of one world (1-based)."""
        return self.positions()[:, world - 1]

    def total_energies(self) -> np.ndarray:
        return np.array([e.total for e in self.energies])

    def energy_drift(self) -> float:
        """max |E(t) - E(0)| / |E(0)| over the recorded snapshots."""
        totals = self.total_energies()
        scale = abs(totals[0]) if totals[0] != 0 else 1.0
        return float(np.max(np.abs(totals - totals[0])) / scale)

    def trajectory_frame(self, physical: Optional[PhysicalParams] = None) -> pd.DataFrame:
        """Long table: step, T, world_index, position, momentum, pinned."""
        n_worlds = self.initial.n_worlds
        positions = self.positions()
        momenta = np.vstack([s.momenta for s in self.snapshots])
        times = np.asarray(self.times)
        if physical is not None:
            positions = from_dimensionless(positions, physical)
            momenta = momentum_from_dimensionless(momenta, physical)
            times = from_dimensionless_time(times, physical)
        return pd.DataFrame(
            {
                "step": np.repeat(self.steps, n_worlds),
                "T": np.repeat(times, n_worlds),
                "world_index": np.tile(np.arange(1, n_worlds + 1), len(self)),
                "position": positions.ravel(),
                "momentum": momenta.ravel(),
                "pinned": np.concatenate([s.pinned for s in self.snapshots]).astype(int),
            }
        )

    def energy_frame(self, physical: Optional[PhysicalParams] = None) -> pd.DataFrame:
        """One row per snapshot: step, T, kinetic, external, interworld, total."""
        df = pd.DataFrame([e.as_dict() for e in self.energies])
        df.insert(0, "T", self.times)
        df.insert(0, "step", self.steps)
        if physical is not None:
            df["T"] = from_dimensionless_time(df["T"].to_numpy(), physical)
            for col in ("kinetic", "external", "interworld", "total"):
                df[col] = energy_from_dimensionless(df[col].to_numpy(), physical)
        return df


def total_energy(
    ensemble: WorldEnsemble, cfg: SimulationConfig, params: PhysicalParams
) -> EnergyDecomposition:
    """Kinetic sum p^2/2m, external sum V(x_n) and the interworld potential."""
    return _decompose(ensemble, cfg.external, build_potential(cfg.potential, params), params.mass)


def _decompose(state: WorldEnsemble, external: ExternalPotential, potential, mass: float):
    x, p = state.positions, state.momenta
    return EnergyDecomposition(
        kinetic=float(np.sum(p * p) / (2.0 * mass)),
        external=external.energy(x, mass),
        interworld=potential.energy(x),
    )


class _VerletStepper:
    """Velocity Verlet with pinned worlds; keeps the last force evaluation."""

    def __init__(self, cfg: SimulationConfig, params: PhysicalParams, pinned: np.ndarray):
        self.cfg = cfg
        self.params = params
        self.pinned = pinned
        self.potential = build_potential(cfg.potential, params)
        self._cached: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def forces(self, x: np.ndarray) -> np.ndarray:
        if self._cached is not None and np.array_equal(self._cached[0], x):
            return self._cached[1]
        f = self.potential.forces(x) + self.cfg.external.forces(x, self.params.mass)
        f[self.pinned] = 0.0
        self._cached = (x.copy(), f)
        return f

    def energy(self, state: WorldEnsemble) -> EnergyDecomposition:
        return _decompose(state, self.cfg.external, self.potential, self.params.mass)

    def advance(self, state: WorldEnsemble, step_index: int) -> WorldEnsemble:
        dt = self.cfg.dt
        half = 0.5 * dt
        x = state.positions
        p = state.momenta + half * self.forces(x)
        p[self.pinned] = 0.0

        x_new = x + dt * p / self.params.mass
        violation = first_order_violation(x_new)
        if violation is not None:
            n, m = violation
            raise CollapseError(
                f"Worlds {n} and {m} crossed at step {step_index} "
                f"(x_{n}={x_new[n - 1]!r}, x_{m}={x_new[m - 1]!r})",
                step=step_index,
                pair=violation,
            )

        p_new = p + half * self.forces(x_new)
        p_new[self.pinned] = 0.0
        return WorldEnsemble(x_new, p_new, self.pinned)


def step(
    ensemble: WorldEnsemble, cfg: SimulationConfig, params: PhysicalParams, step_index: int = 1
) -> WorldEnsemble:
    """One velocity-Verlet step: half kick, drift, half kick.

    Pinned worlds have their force and momentum zeroed, so their positions
    are unchanged bit for bit.

    Raises:
        CollapseError: If the drift breaks strict ordering
        SingularityError: Propagated from the potential
    """
    stepper = _VerletStepper(cfg, params, cfg.pinned_mask(ensemble))
    return stepper.advance(ensemble, step_index)


def run(
    initial: WorldEnsemble,
    cfg: SimulationConfig,
    params: PhysicalParams,
    stop_condition: Optional[StopCondition] = None,
    on_record: Optional[RecordCallback] = None,
) -> TrajectoryRecord:
    """Integrate ``cfg.steps`` steps, recording step 0, every ``record_every`` and the last.

    An ordering violation ends the run with ``record.failure`` set and the
    last valid state recorded. ``stop_condition(state, T)`` may end the run
    early by returning a reason string.

    Raises:
        DomainError: If the initial ensemble is not valid
        SingularityError: With ``.trajectory`` holding the partial record
    """
    report = validate_ensemble(initial)
    if not report:
        raise DomainError(f"Initial ensemble is not valid: {report.message}")

    pinned = cfg.pinned_mask(initial)
    stepper = _VerletStepper(cfg, params, pinned)
    state = WorldEnsemble(initial.positions, np.where(pinned, 0.0, initial.momenta), pinned)
    record = TrajectoryRecord()

    def snapshot(k: int, s: WorldEnsemble):
        t = k * cfg.dt
        record.append(k, t, s, stepper.energy(s))
        if on_record is not None:
            on_record(k, t, s)

    snapshot(0, state)
    last_recorded = 0
    k = 0
    try:
        for k in range(1, cfg.steps + 1):
            try:
                state = stepper.advance(state, k)
            except CollapseError as e:
                if last_recorded != k - 1:
                    snapshot(k - 1, state)
                record.failure = CollapseEvent(k, k * cfg.dt, e.pair, str(e))
                return record

            reason = stop_condition(state, k * cfg.dt) if stop_condition else None
            if reason or k % cfg.record_every == 0 or k == cfg.steps:
                snapshot(k, state)
                last_recorded = k
            if reason:
                record.stop_reason = reason
                break
    except SingularityError as e:
        if last_recorded != k - 1 and k > 0:
            snapshot(k - 1, state)
        e.trajectory = record
        raise

    return record
