"""Tests for velocity-Verlet time evolution."""
import math

import numpy as np
import pytest

from miworlds.core import PhysicalParams, WorldEnsemble
from miworlds.exceptions import ConfigurationError, DomainError, SingularityError
from miworlds.integrator import (
    SimulationConfig,
    run,
    step,
    total_energy,
)
from miworlds.potential import ExternalPotential, PotentialSpec


def toy_config(**kwargs):
    values = dict(potential=PotentialSpec.toy(), dt=1e-3, steps=10)
    values.update(kwargs)
    return SimulationConfig(**values)


# =============================================================================
# CONFIGURATION TESTS
# =============================================================================

class TestSimulationConfig:
    """Test run configuration validation."""

    @pytest.mark.parametrize("dt", [0.0, -1e-3, float("nan")])
    def test_bad_dt(self, dt):
        """Test that dt must be positive and finite."""
        with pytest.raises(ConfigurationError, match="dt"):
            toy_config(dt=dt)

    @pytest.mark.parametrize("steps", [0, -5, 1.5])
    def test_bad_steps(self, steps):
        """Test that steps must be a positive integer."""
        with pytest.raises(ConfigurationError, match="steps"):
            toy_config(steps=steps)

    def test_bad_pinned(self):
        """Test that pinned counts must be nonnegative integers."""
        with pytest.raises(ConfigurationError, match="pinned_left"):
            toy_config(pinned_left=-1)

    def test_pinned_mask(self, uniform_ensemble):
        """Test that boundary pins combine with the ensemble's own mask."""
        ensemble = uniform_ensemble.with_pinned([False] * 5 + [True] + [False] * 5)
        mask = toy_config(pinned_left=1, pinned_right=2).pinned_mask(ensemble)
        assert np.flatnonzero(mask).tolist() == [0, 5, 9, 10]

    def test_pinning_everything_rejected(self):
        """Test that at least one world must stay free."""
        with pytest.raises(ConfigurationError, match="Cannot pin"):
            toy_config(pinned_left=2, pinned_right=1).pinned_mask(WorldEnsemble([0.0, 1.0, 2.0]))


# =============================================================================
# ENERGY TESTS
# =============================================================================

class TestTotalEnergy:
    """Test the energy decomposition."""

    def test_interworld_only(self, unit_params):
        """Test three worlds at rest with no external field."""
        energy = total_energy(WorldEnsemble([0.0, 1.0, 2.0]), toy_config(), unit_params)
        assert energy.kinetic == 0.0
        assert energy.external == 0.0
        assert energy.total == pytest.approx(0.25)

    def test_with_harmonic_field(self, unit_params):
        """Test that the harmonic field adds m omega^2 sum(x^2) / 2."""
        cfg = toy_config(external=ExternalPotential.harmonic(2 * math.pi))
        energy = total_energy(WorldEnsemble([0.0, 1.0, 2.0]), cfg, unit_params)
        assert energy.total == pytest.approx(0.25 + 0.5 * (2 * math.pi) ** 2 * 5)

    def test_kinetic(self):
        """Test p^2 / 2m summed over worlds."""
        params = PhysicalParams(mass=2.0)
        energy = total_energy(WorldEnsemble([0.0, 1.0], momenta=[2.0, -2.0]), toy_config(), params)
        assert energy.kinetic == pytest.approx(2.0)
        assert set(energy.as_dict()) == {"kinetic", "external", "interworld", "total"}


# =============================================================================
# STEP TESTS
# =============================================================================

class TestStep:
    """Test a single velocity-Verlet step."""

    def test_free_world_drifts(self):
        """Test that one world without forces moves by p dt / m."""
        params = PhysicalParams(mass=2.0)
        moved = step(WorldEnsemble([0.0], momenta=[4.0]), toy_config(dt=0.5), params)
        assert moved.positions.tolist() == [1.0]
        assert moved.momenta.tolist() == [4.0]

    def test_harmonic_kick(self, unit_params):
        """Test the half-kick, drift, half-kick update in a harmonic field."""
        cfg = toy_config(dt=0.1, external=ExternalPotential.harmonic(1.0))
        moved = step(WorldEnsemble([1.0]), cfg, unit_params)
        p_half = -0.05
        x_new = 1.0 + 0.1 * p_half
        assert moved.positions[0] == pytest.approx(x_new)
        assert moved.momenta[0] == pytest.approx(p_half - 0.05 * x_new)

    def test_pinned_worlds_do_not_move(self, uniform_ensemble, unit_params):
        """Test that pinned worlds keep their positions exactly."""
        moved = step(uniform_ensemble, toy_config(pinned_left=2, pinned_right=1), unit_params)
        np.testing.assert_array_equal(moved.positions[:2], uniform_ensemble.positions[:2])
        assert moved.positions[-1] == uniform_ensemble.positions[-1]
        assert not moved.momenta[[0, 1, -1]].any()
        assert moved.positions[9] != uniform_ensemble.positions[9]


# =============================================================================
# RUN TESTS
# =============================================================================

class TestRun:
    """Test full runs and their records."""

    def test_single_step_records_two_snapshots(self, uniform_ensemble, unit_params):
        """Test that steps=1 records the initial and final state."""
        record = run(uniform_ensemble, toy_config(steps=1), unit_params)
        assert record.steps == [0, 1]
        assert len(record) == 2
        assert record.completed

    def test_record_every(self, uniform_ensemble, unit_params):
        """Test the recording schedule with the final step always kept."""
        record = run(uniform_ensemble, toy_config(steps=10, record_every=3), unit_params)
        assert record.steps == [0, 3, 6, 9, 10]
        assert record.times[-1] == pytest.approx(10 * 1e-3)

    def test_invalid_initial_state(self, unit_params):
        """Test that an unordered initial ensemble is rejected."""
        with pytest.raises(DomainError, match="not strictly ordered"):
            run(WorldEnsemble([0.0, 2.0, 1.0]), toy_config(), unit_params)

    def test_harmonic_period(self):
        """Test that a lone world returns after one period in the frame."""
        frame = PhysicalParams.dimensionless()
        cfg = toy_config(dt=1e-3, steps=1000, external=ExternalPotential.harmonic(frame.omega))
        record = run(WorldEnsemble([1.0]), cfg, frame)
        assert record.final.positions[0] == pytest.approx(1.0, abs=1e-4)
        quarter = record.world_positions(1)[250]
        assert quarter == pytest.approx(0.0, abs=1e-2)

    def test_energy_conserved(self, uniform_ensemble, unit_params):
        """Test that total energy stays close to its initial value."""
        cfg = toy_config(dt=2e-4, steps=2500, external=ExternalPotential.harmonic(1.0))
        record = run(uniform_ensemble, cfg, unit_params)
        assert record.energy_drift() < 1e-4

    def test_energy_error_second_order(self, uniform_ensemble, unit_params):
        """Test that halving dt cuts the energy error by about four."""
        external = ExternalPotential.harmonic(1.0)
        coarse = run(uniform_ensemble, toy_config(dt=4e-4, steps=1250, external=external, record_every=5), unit_params)
        fine = run(uniform_ensemble, toy_config(dt=2e-4, steps=2500, external=external, record_every=10), unit_params)
        assert fine.energy_drift() < coarse.energy_drift() / 2.5

    def test_time_reversible(self, make_ensemble, unit_params):
        """Test that flipping momenta retraces the trajectory."""
        start = WorldEnsemble(make_ensemble(10, spread=0.1))
        cfg = toy_config(dt=1e-3, steps=200, external=ExternalPotential.harmonic(1.0))
        forward = run(start, cfg, unit_params).final
        back = run(forward.with_state(forward.positions, -forward.momenta), cfg, unit_params).final
        np.testing.assert_allclose(back.positions, start.positions, atol=1e-9)
        np.testing.assert_allclose(back.momenta, 0.0, atol=1e-9)

    def test_pinned_worlds_fixed_over_run(self, uniform_ensemble, unit_params):
        """Test that pinned worlds never move during a run."""
        record = run(uniform_ensemble, toy_config(steps=50, pinned_left=1, pinned_right=1), unit_params)
        positions = record.positions()
        assert np.all(positions[:, 0] == uniform_ensemble.positions[0])
        assert np.all(positions[:, -1] == uniform_ensemble.positions[-1])

    def test_collapse_ends_run(self, unit_params):
        """Test that crossing worlds end the run with a failure record."""
        ensemble = WorldEnsemble([0.0, 1.0], momenta=[10.0, -10.0])
        record = run(ensemble, toy_config(dt=0.1, steps=10), unit_params)
        assert record.failure is not None
        assert record.failure.step == 1
        assert record.failure.pair == (1, 2)
        assert record.steps == [0]
        assert not record.completed

    def test_singularity_carries_partial_record(self, unit_params):
        """Test that a diverging potential aborts with the partial trajectory attached."""
        ensemble = WorldEnsemble(
            [-1.0, -0.5, 0.0, 0.5, 1.0], momenta=[-1000.0, 0.0, 0.0, 0.0, 1000.0]
        )
        cfg = SimulationConfig(PotentialSpec.rational(4), dt=0.01, steps=5)
        with pytest.raises(SingularityError, match="world 3") as exc:
            run(ensemble, cfg, unit_params)
        assert exc.value.trajectory is not None
        assert exc.value.trajectory.steps == [0]

    def test_stop_condition(self, uniform_ensemble, unit_params):
        """Test that a stop condition ends the run and records the reason."""

        def stop(state, t):
            return "enough" if t >= 2.5e-3 else None

        record = run(uniform_ensemble, toy_config(steps=10), unit_params, stop_condition=stop)
        assert record.stop_reason == "enough"
        assert record.steps[-1] == 3

    def test_on_record_callback(self, uniform_ensemble, unit_params):
        """Test that every recorded snapshot is reported."""
        seen = []
        run(uniform_ensemble, toy_config(steps=4, record_every=2), unit_params,
            on_record=lambda k, t, s: seen.append(k))
        assert seen == [0, 2, 4]


# =============================================================================
# OUTPUT TABLE TESTS
# =============================================================================

class TestTrajectoryFrames:
    """Test tabular views of a record."""

    def test_trajectory_frame(self, uniform_ensemble, unit_params):
        """Test the long trajectory table with 1-based world indices."""
        record = run(uniform_ensemble, toy_config(steps=2, pinned_left=1), unit_params)
        df = record.trajectory_frame()
        assert list(df.columns) == ["step", "T", "world_index", "position", "momentum", "pinned"]
        assert len(df) == 3 * 11
        assert df["world_index"].min() == 1
        assert df["world_index"].max() == 11
        assert df.loc[df["world_index"] == 1, "pinned"].eq(1).all()

    def test_energy_frame(self, uniform_ensemble, unit_params):
        """Test one energy row per snapshot."""
        record = run(uniform_ensemble, toy_config(steps=3), unit_params)
        df = record.energy_frame()
        assert list(df.columns) == ["step", "T", "kinetic", "external", "interworld", "total"]
        assert df["step"].tolist() == [0, 1, 2, 3]

    def test_physical_conversion(self, uniform_ensemble):
        """Test that physical output rescales times."""
        frame = PhysicalParams.dimensionless()
        record = run(uniform_ensemble, toy_config(steps=1), frame)
        physical = PhysicalParams(omega=2.0)
        df = record.energy_frame(physical)
        assert df["T"].iloc[-1] == pytest.approx(1e-3 * math.pi)
