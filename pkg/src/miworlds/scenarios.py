"""Named experiments on ground and first-excited oscillator ensembles.

Each scenario samples an equal-area ensemble, optionally cuts a window of
free worlds around the node with pinned neighbours on both sides, evolves
it in a harmonic trap and classifies what happened to the node gap.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console

from miworlds.core import PhysicalParams, WorldEnsemble, as_positions
from miworlds.density import DensityKind, DensityModel, bohmian_force_oracle, sample_worlds
from miworlds.exceptions import ConfigurationError, DomainError, ScenarioError, SingularityError
from miworlds.integrator import RecordCallback, SimulationConfig, TrajectoryRecord, run
from miworlds.potential import ExternalPotential, PotentialSpec, build_potential

console = Console()

DEFAULT_COLLAPSE_FRACTION = 0.5
STATIONARY_GAP_FRACTION = 0.1
STATIONARY_SPACING_FRACTION = 0.2
TARGET_SNAPSHOTS = 1000


class Outcome(str, Enum):
    STATIONARY = "Stationary"
    OSCILLATORY = "Oscillatory"
    NODE_COLLAPSE = "NodeCollapse"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class ScenarioDefinition:
    """Fixed description of one experiment.

    ``n_free`` worlds around the node are evolved and ``n_pinned`` worlds
    on each side of them are held fixed; ``n_free=None`` evolves the whole
    sampled ensemble. ``n_pinned=None`` pads with twice the potential
    reach, the least that reproduces the full-ensemble forces on the free
    worlds.
    """

    name: str
    description: str
    density: DensityKind
    n_worlds: int
    potential: Callable[[], PotentialSpec]
    dt: float
    desk_horizon: float
    full_horizon: float = 1.0
    n_free: Optional[int] = None
    n_pinned: Optional[int] = None
    refine_factor: Optional[float] = None

    @property
    def has_node(self) -> bool:
        return self.density is DensityKind.HARMONIC_FIRST_EXCITED


SCENARIOS: Dict[str, ScenarioDefinition] = {
    d.name: d
    for d in (
        ScenarioDefinition(
            name="fig1_ground_toy",
            description="50 ground-state worlds under the toy potential for one period",
            density=DensityKind.HARMONIC_GROUND,
            n_worlds=50,
            potential=PotentialSpec.toy,
            dt=1e-5,
            desk_horizon=1.0,
        ),
        ScenarioDefinition(
            name="fig2_excited_toy",
            description="40 first-excited worlds under the toy potential",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=40,
            potential=PotentialSpec.toy,
            dt=1e-6,
            desk_horizon=0.1,
            refine_factor=0.1,
        ),
        ScenarioDefinition(
            name="fig3_truncated_toy",
            description="10 free worlds around the node of a 5000-world excited ensemble, toy potential",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=5000,
            potential=PotentialSpec.toy,
            dt=1e-8,
            desk_horizon=0.01,
            n_free=10,
            n_pinned=5,
            refine_factor=0.1,
        ),
        ScenarioDefinition(
            name="fig4_two_free_L4",
            description="2 free node-adjacent worlds, rational smoothing L=4",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=5000,
            potential=lambda: PotentialSpec.rational(4),
            dt=1e-9,
            desk_horizon=0.01,
            n_free=2,
        ),
        ScenarioDefinition(
            name="fig5_ten_free_L4",
            description="10 free worlds around the node, rational smoothing L=4",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=5000,
            potential=lambda: PotentialSpec.rational(4),
            dt=1e-9,
            desk_horizon=0.01,
            n_free=10,
        ),
        ScenarioDefinition(
            name="fig6_ten_free_L6",
            description="10 free worlds around the node, rational smoothing L=6",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=5000,
            potential=lambda: PotentialSpec.rational(6),
            dt=1e-9,
            desk_horizon=0.01,
            n_free=10,
        ),
        ScenarioDefinition(
            name="figA1_two_free_equiv",
            description="2 free node-adjacent worlds, five-world equivariance potential",
            density=DensityKind.HARMONIC_FIRST_EXCITED,
            n_worlds=5000,
            potential=PotentialSpec.equivariance,
            dt=1e-9,
            desk_horizon=0.01,
            n_free=2,
        ),
    )
}


@dataclass(frozen=True)
class ScenarioOverrides:
    """Per-run changes to a scenario definition; None keeps the default."""

    dt: Optional[float] = None
    steps: Optional[int] = None
    horizon: Optional[float] = None
    full: bool = False
    record_every: Optional[int] = None
    collapse_fraction: float = DEFAULT_COLLAPSE_FRACTION
    refine: bool = True
    potential: Optional[PotentialSpec] = None

    def __post_init__(self):
        if not 0.0 < self.collapse_fraction < 1.0:
            raise ConfigurationError(
                f"collapse_fraction must lie in (0, 1), got {self.collapse_fraction!r}"
            )


@dataclass
class ScenarioReport:
    name: str
    trajectory: TrajectoryRecord
    metrics: Dict[str, object]
    outcome: Outcome
    free_worlds: Tuple[int, ...] = ()
    config: Optional[SimulationConfig] = None
    variants: List["ScenarioReport"] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        """JSON-ready summary with stable key names."""
        data = {"scenario": self.name, "outcome": self.outcome.value}
        data.update(self.metrics)
        if self.variants:
            data["variants"] = [v.summary() for v in self.variants]
        return data


def get_scenario(name: str) -> ScenarioDefinition:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ScenarioError(
            f"Unknown scenario '{name}'. Available scenarios: {', '.join(SCENARIOS)}"
        )


# =============================================================================
# DIAGNOSTICS
# =============================================================================

def _node_pair(x: np.ndarray) -> Tuple[int, int]:
    n = x.size
    if n % 2 or n < 2:
        raise DomainError(f"Node gap needs an even number of worlds, got {n}")
    left, right = n // 2 - 1, n // 2
    if not x[left] < 0.0 < x[right]:
        raise DomainError(
            f"Worlds {left + 1} and {right + 1} do not straddle the node at 0 "
            f"({x[left]!r}, {x[right]!r})"
        )
    return left, right


def node_gap_width(ensemble) -> float:
    """Distance between worlds N/2 and N/2+1, which must straddle x = 0.

    Raises:
        DomainError: For odd N or when the middle pair does not straddle 0
    """
    x = as_positions(ensemble)
    left, right = _node_pair(x)
    return float(x[right] - x[left])


def oscillation_amplitude(traj: TrajectoryRecord, world: int) -> float:
    """max over snapshots of |x_world(t) - x_world(0)| (world is 1-based)."""
    history = traj.world_positions(world)
    return float(np.max(np.abs(history - history[0])))


class _RunMonitor:
    """Per-step tracker used as the integrator's stop condition."""

    def __init__(self, initial: WorldEnsemble, free: np.ndarray, node: bool, threshold: float):
        self.x0 = initial.positions.copy()
        self.free = free
        self.node = node
        self.max_disp = np.zeros(free.size)
        self.gap0 = node_gap_width(initial) if node else None
        self.min_gap = self.gap0
        self.threshold = threshold
        self.trigger_time: Optional[float] = None

    def __call__(self, state: WorldEnsemble, time: float) -> Optional[str]:
        x = state.positions
        np.maximum(self.max_disp, np.abs(x[self.free] - self.x0[self.free]), out=self.max_disp)
        if not self.node:
            return None
        left = x.size // 2 - 1
        gap = x[left + 1] - x[left]
        self.min_gap = min(self.min_gap, gap)
        if gap < self.threshold * self.gap0:
            self.trigger_time = time
            return f"node gap {gap:.6g} fell below {self.threshold:g} of its initial width"
        return None


def _local_spacing(x: np.ndarray) -> np.ndarray:
    gaps = np.diff(x)
    left = np.concatenate([[gaps[0]], gaps])
    right = np.concatenate([gaps, [gaps[-1]]])
    return 0.5 * (left + right)


# =============================================================================
# SCENARIO CONSTRUCTION
# =============================================================================

def scenario_ensemble(
    definition: ScenarioDefinition, spec: PotentialSpec
) -> Tuple[WorldEnsemble, int]:
    """Initial ensemble for a scenario and the pinned count on each side."""
    model = DensityModel(definition.density)
    ensemble = sample_worlds(model, definition.n_worlds)
    if definition.n_free is None:
        return ensemble, 0

    pad = definition.n_pinned if definition.n_pinned is not None else spec.interaction_width
    half_free = definition.n_free // 2
    mid = definition.n_worlds // 2
    start, stop = mid - half_free - pad, mid + half_free + pad
    if start < 0 or stop > definition.n_worlds:
        raise ScenarioError(
            f"Window of {stop - start} worlds does not fit in an ensemble of "
            f"{definition.n_worlds}"
        )
    return ensemble.subset(start, stop), pad


def _steps_for(definition: ScenarioDefinition, overrides: ScenarioOverrides, dt: float) -> int:
    if overrides.steps is not None:
        return overrides.steps
    horizon = overrides.horizon
    if horizon is None:
        horizon = definition.full_horizon if overrides.full else definition.desk_horizon
    return max(1, int(round(horizon / dt)))


def _refined(
    definition: ScenarioDefinition, overrides: ScenarioOverrides, dt: float
) -> Optional[Tuple[float, ScenarioOverrides]]:
    """Time step and overrides of the refined variant, or None without one."""
    if not (overrides.refine and definition.refine_factor):
        return None
    refined_overrides = overrides
    if overrides.steps is not None:
        refined_steps = int(round(overrides.steps / definition.refine_factor))
        refined_overrides = replace(overrides, steps=refined_steps)
    return dt * definition.refine_factor, refined_overrides


def planned_steps(
    name: str,
    overrides: Optional[ScenarioOverrides] = None,
    include_variants: bool = False,
) -> int:
    """Step count of the main run of a scenario under the given overrides.

    With ``include_variants`` the refined-dt run is added.
    """
    definition = get_scenario(name)
    overrides = overrides or ScenarioOverrides()
    dt = overrides.dt or definition.dt
    total = _steps_for(definition, overrides, dt)
    refined = _refined(definition, overrides, dt) if include_variants else None
    if refined is not None:
        total += _steps_for(definition, refined[1], refined[0])
    return total


def _classify(
    has_node: bool,
    traj: TrajectoryRecord,
    monitor: _RunMonitor,
    free: np.ndarray,
) -> Tuple[Outcome, Dict[str, object]]:
    x0 = traj.initial.positions
    amplitudes = monitor.max_disp
    metrics: Dict[str, object] = {
        "steps_run": int(traj.steps[-1]),
        "T_final": float(traj.times[-1]),
        "energy_drift_rel": traj.energy_drift(),
        "amplitude_max": float(amplitudes.max()) if amplitudes.size else 0.0,
        "amplitudes": {int(w) + 1: float(a) for w, a in zip(free, amplitudes)},
    }
    collapsed = traj.failure is not None or monitor.trigger_time is not None
    if traj.failure is not None:
        metrics["collapse_time"] = traj.failure.time
        metrics["collapse_pair"] = list(traj.failure.pair)
    elif monitor.trigger_time is not None:
        metrics["collapse_time"] = monitor.trigger_time

    if has_node:
        gap0 = monitor.gap0
        metrics["gap_width_initial"] = gap0
        final = traj.final.positions
        metrics["gap_width_final"] = float(final[x0.size // 2] - final[x0.size // 2 - 1])
        metrics["gap_width_min"] = float(monitor.min_gap)
        if collapsed:
            return Outcome.NODE_COLLAPSE, metrics
        if metrics["amplitude_max"] < STATIONARY_GAP_FRACTION * gap0:
            return Outcome.STATIONARY, metrics
        return Outcome.OSCILLATORY, metrics

    spacing = _local_spacing(x0)
    ratios = amplitudes / spacing[free]
    inner = ratios[5:-5] if ratios.size > 10 else ratios
    metrics["inner_displacement_ratio"] = float(inner.max())
    metrics["boundary_displacement_ratio"] = float(ratios.max())
    if collapsed:
        return Outcome.NODE_COLLAPSE, metrics
    if metrics["inner_displacement_ratio"] <= STATIONARY_SPACING_FRACTION:
        return Outcome.STATIONARY, metrics
    return Outcome.OSCILLATORY, metrics


def _run_once(
    definition: ScenarioDefinition,
    overrides: ScenarioOverrides,
    dt: float,
    params: PhysicalParams,
    on_record: Optional[RecordCallback],
) -> ScenarioReport:
    spec = overrides.potential or definition.potential()
    initial, pad = scenario_ensemble(definition, spec)
    steps = _steps_for(definition, overrides, dt)
    record_every = overrides.record_every or max(1, steps // TARGET_SNAPSHOTS)
    cfg = SimulationConfig(
        potential=spec,
        dt=dt,
        steps=steps,
        external=ExternalPotential.harmonic(params.omega),
        record_every=record_every,
        pinned_left=pad,
        pinned_right=pad,
    )
    return evaluate_run(
        definition.name,
        initial,
        cfg,
        params,
        has_node=definition.has_node,
        collapse_fraction=overrides.collapse_fraction,
        on_record=on_record,
    )


def evaluate_run(
    name: str,
    initial: WorldEnsemble,
    cfg: SimulationConfig,
    params: PhysicalParams,
    has_node: bool,
    collapse_fraction: float = DEFAULT_COLLAPSE_FRACTION,
    on_record: Optional[RecordCallback] = None,
) -> ScenarioReport:
    """Integrate ``initial`` under ``cfg`` and classify the outcome.

    Node runs stop as soon as the node gap falls below
    ``collapse_fraction`` of its initial width. A singular potential gives
    an Aborted report holding the partial trajectory.
    """
    free = np.flatnonzero(~cfg.pinned_mask(initial))
    monitor = _RunMonitor(initial, free, has_node, collapse_fraction)
    free_worlds = tuple(int(w) + 1 for w in free)

    console.print(
        f"[cyan]Running {name}: {initial.n_worlds} worlds ({free.size} free), "
        f"{cfg.potential.label}, dt={cfg.dt:g}, {cfg.steps} steps[/cyan]"
    )
    try:
        traj = run(initial, cfg, params, stop_condition=monitor, on_record=on_record)
    except SingularityError as e:
        console.print(f"[yellow]Warning: {name} aborted: {e}[/yellow]")
        traj = e.trajectory or TrajectoryRecord()
        metrics = {
            "steps_run": int(traj.steps[-1]) if len(traj) else 0,
            "abort_reason": str(e),
            "abort_world": e.world,
            "dt": cfg.dt,
            "potential": cfg.potential.label,
            "collapse_fraction": collapse_fraction,
        }
        return ScenarioReport(name, traj, metrics, Outcome.ABORTED, free_worlds, cfg)

    outcome, metrics = _classify(has_node, traj, monitor, free)
    metrics["dt"] = cfg.dt
    metrics["potential"] = cfg.potential.label
    metrics["collapse_fraction"] = collapse_fraction
    return ScenarioReport(name, traj, metrics, outcome, free_worlds, cfg)


def run_scenario(
    name: str,
    overrides: Optional[ScenarioOverrides] = None,
    params: Optional[PhysicalParams] = None,
    on_record: Optional[RecordCallback] = None,
) -> ScenarioReport:
    """Run a named scenario and classify its outcome.

    Collapse events are part of the report, not errors. Scenarios with a
    refinement factor also run at dt * factor and attach that report under
    ``variants``.

    Raises:
        ScenarioError: For an unknown name
    """
    definition = get_scenario(name)
    overrides = overrides or ScenarioOverrides()
    params = params or PhysicalParams.dimensionless()
    dt = overrides.dt or definition.dt

    report = _run_once(definition, overrides, dt, params, on_record)
    refined = _refined(definition, overrides, dt)
    if refined is not None:
        refined_dt, refined_overrides = refined
        variant = _run_once(definition, refined_overrides, refined_dt, params, on_record)
        report.variants.append(variant)
        report.metrics["refined_outcome"] = variant.outcome.value

    style = "green" if report.outcome is not Outcome.ABORTED else "red"
    console.print(f"[{style}]{name}: {report.outcome.value}[/{style}]")
    return report


# =============================================================================
# STATIC STUDIES
# =============================================================================

def amplitude_dt_sweep(
    name: str, dts: Sequence[float], overrides: Optional[ScenarioOverrides] = None
) -> pd.DataFrame:
    """Oscillation amplitude of every free world for each time step.

    Each run covers the same horizon; the table has columns
    dt, world_index, amplitude, outcome.
    """
    base = overrides or ScenarioOverrides()
    rows = []
    for dt in dts:
        report = run_scenario(name, replace(base, dt=float(dt), steps=None, refine=False))
        for world, amplitude in report.metrics.get("amplitudes", {}).items():
            rows.append(
                {"dt": float(dt), "world_index": world, "amplitude": amplitude,
                 "outcome": report.outcome.value}
            )
    return pd.DataFrame(rows, columns=["dt", "world_index", "amplitude", "outcome"])


def stationary_energy_per_world(
    n_worlds: int,
    spec: Optional[PotentialSpec] = None,
    params: Optional[PhysicalParams] = None,
) -> Tuple[float, float]:
    """Mean energy per world of an equal-area ground-state ensemble at rest.

    Returns:
        (energy per world, relative deviation from hbar omega / 2)
    """
    params = params or PhysicalParams.dimensionless()
    spec = spec or PotentialSpec.toy()
    x = sample_worlds(DensityModel.ground(), n_worlds).positions
    external = ExternalPotential.harmonic(params.omega).energy(x, params.mass)
    interworld = build_potential(spec, params).energy(x)
    per_world = (external + interworld) / n_worlds
    target = params.ground_state_energy
    return per_world, abs(per_world - target) / target


def force_oracle_table(
    model: DensityModel,
    n_worlds: int,
    spec: PotentialSpec,
    params: Optional[PhysicalParams] = None,
) -> pd.DataFrame:
    """Interworld force on a sampled ensemble against the stationary-state oracle.

    Columns: world_index, position, interworld_force, oracle_force,
    relative_error, boundary, near_node.
    """
    params = params or model.params
    x = sample_worlds(model, n_worlds).positions
    force = build_potential(spec, params).forces(x)
    oracle = np.asarray(bohmian_force_oracle(replace(model, params=params), x), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(oracle != 0.0, np.abs(force - oracle) / np.abs(oracle), np.nan)

    index = np.arange(n_worlds)
    width = spec.interaction_width
    boundary = (index < width) | (index >= n_worlds - width)
    if model.has_node:
        mid = n_worlds // 2
        near_node = (index >= mid - width) & (index < mid + width)
    else:
        near_node = np.zeros(n_worlds, dtype=bool)

    return pd.DataFrame(
        {
            "world_index": index + 1,
            "position": x,
            "interworld_force": force,
            "oracle_force": oracle,
            "relative_error": rel,
            "boundary": boundary,
            "near_node": near_node,
        }
    )


def oracle_rms_error(table: pd.DataFrame, central_fraction: float = 0.8) -> float:
    """Relative RMS deviation from the oracle over the central worlds."""
    n = len(table)
    cut = int(round(n * (1.0 - central_fraction) / 2.0))
    central = table.iloc[cut:n - cut]
    diff = central["interworld_force"] - central["oracle_force"]
    return float(np.sqrt(np.mean(diff**2)) / np.sqrt(np.mean(central["oracle_force"] ** 2)))
