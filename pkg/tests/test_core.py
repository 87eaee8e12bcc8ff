"""Tests for domain types and unit conversions."""
import math

import numpy as np
import pytest

from miworlds.core import (
    FRAME_HBAR,
    PhysicalParams,
    UnitSystem,
    WorldEnsemble,
    as_positions,
    energy_from_dimensionless,
    from_dimensionless,
    from_dimensionless_time,
    momentum_from_dimensionless,
    to_dimensionless,
    to_dimensionless_time,
)
from miworlds.exceptions import ConfigurationError


# =============================================================================
# PHYSICAL PARAMS TESTS
# =============================================================================

class TestPhysicalParams:
    """Test physical constants."""

    def test_defaults_are_unit(self):
        """Test that the default constants are all 1."""
        params = PhysicalParams()
        assert (params.mass, params.hbar, params.omega) == (1.0, 1.0, 1.0)

    @pytest.mark.parametrize("field", ["mass", "hbar", "omega"])
    @pytest.mark.parametrize("value", [0.0, -1.0, float("nan"), float("inf")])
    def test_rejects_nonpositive_or_nonfinite(self, field, value):
        """Test that every constant must be positive and finite."""
        with pytest.raises(ConfigurationError, match=field):
            PhysicalParams(**{field: value})

    def test_dimensionless_frame(self):
        """Test the frame constants m = 1, omega = 2 pi, hbar = 4 pi."""
        params = PhysicalParams.dimensionless()
        assert params.mass == 1.0
        assert params.omega == pytest.approx(2 * math.pi)
        assert params.hbar == pytest.approx(4 * math.pi)
        assert FRAME_HBAR == pytest.approx(4 * math.pi)

    def test_interworld_prefactor(self):
        """Test hbar^2 / 8m."""
        assert PhysicalParams().interworld_prefactor == 0.125
        assert PhysicalParams(mass=2.0, hbar=4.0).interworld_prefactor == 1.0
        assert PhysicalParams.dimensionless().interworld_prefactor == pytest.approx(2 * math.pi**2)

    def test_ground_state_energy_in_frame(self):
        """Test that hbar omega / 2 is 4 pi^2 in the frame."""
        assert PhysicalParams.dimensionless().ground_state_energy == pytest.approx(4 * math.pi**2)


class TestUnitSystem:
    """Test unit system selection."""

    def test_dimensionless_output_keeps_frame_units(self):
        """Test that dimensionless mode writes results without conversion."""
        assert UnitSystem.DIMENSIONLESS.output_params(PhysicalParams(mass=3.0)) is None

    def test_physical_output_uses_params(self):
        """Test that physical mode converts with the constants as given."""
        given = PhysicalParams(mass=3.0)
        assert UnitSystem.PHYSICAL.output_params(given) is given

    def test_from_string(self):
        """Test construction from the configuration string."""
        assert UnitSystem("physical") is UnitSystem.PHYSICAL


# =============================================================================
# WORLD ENSEMBLE TESTS
# =============================================================================

class TestWorldEnsemble:
    """Test the world ensemble container."""

    def test_defaults(self):
        """Test that momenta default to zero and nothing is pinned."""
        ensemble = WorldEnsemble([0.0, 1.0, 2.0])
        assert len(ensemble) == 3
        assert ensemble.n_worlds == 3
        np.testing.assert_array_equal(ensemble.momenta, np.zeros(3))
        assert not ensemble.pinned.any()

    def test_arrays_are_read_only(self):
        """Test that stored arrays cannot be modified in place."""
        ensemble = WorldEnsemble([0.0, 1.0])
        with pytest.raises(ValueError):
            ensemble.positions[0] = 5.0

    def test_input_is_copied(self):
        """Test that later changes to the input do not leak in."""
        x = np.array([0.0, 1.0])
        ensemble = WorldEnsemble(x)
        x[0] = 9.0
        assert ensemble.positions[0] == 0.0

    def test_length_mismatch(self):
        """Test that momenta and pinned must match positions in length."""
        with pytest.raises(ConfigurationError, match="differ in length"):
            WorldEnsemble([0.0, 1.0], momenta=[0.0])

    def test_empty_rejected(self):
        """Test that an ensemble needs at least one world."""
        with pytest.raises(ConfigurationError, match="at least one world"):
            WorldEnsemble([])

    def test_pin_edges(self):
        """Test pinning boundary worlds."""
        ensemble = WorldEnsemble(np.arange(6.0)).pin_edges(2, 1)
        assert ensemble.pinned.tolist() == [True, True, False, False, False, True]

    def test_pin_edges_must_leave_a_free_world(self):
        """Test that pinning every world is rejected."""
        with pytest.raises(ConfigurationError, match="at least one world must stay free"):
            WorldEnsemble(np.arange(4.0)).pin_edges(2, 2)

    def test_subset(self):
        """Test slicing worlds into a new ensemble."""
        ensemble = WorldEnsemble(np.arange(10.0)).subset(3, 6)
        assert ensemble.positions.tolist() == [3.0, 4.0, 5.0]

    def test_with_state_keeps_pinned(self):
        """Test that replacing the state keeps the pinned mask."""
        ensemble = WorldEnsemble([0.0, 1.0, 2.0]).pin_edges(1, 0)
        moved = ensemble.with_state([0.0, 1.5, 2.5], [0.0, 1.0, 1.0])
        assert moved.pinned.tolist() == [True, False, False]
        assert moved.momenta.tolist() == [0.0, 1.0, 1.0]

    def test_scaled_and_shifted(self):
        """Test scaling and translating positions."""
        ensemble = WorldEnsemble([1.0, 2.0])
        assert ensemble.scaled(2.0).positions.tolist() == [2.0, 4.0]
        assert ensemble.shifted(-1.0).positions.tolist() == [0.0, 1.0]

    def test_as_positions_accepts_sequences(self):
        """Test that plain sequences and ensembles give the same array."""
        np.testing.assert_array_equal(as_positions([0.0, 1.0]), as_positions(WorldEnsemble([0.0, 1.0])))


# =============================================================================
# UNIT CONVERSION TESTS
# =============================================================================

class TestUnitConversions:
    """Test conversion between physical and dimensionless quantities."""

    def test_position_scale(self):
        """Test X = sqrt(2 m omega / hbar) x."""
        params = PhysicalParams(mass=2.0, hbar=1.0, omega=3.0)
        assert to_dimensionless(1.0, params) == pytest.approx(math.sqrt(12.0))

    def test_position_round_trip_array(self):
        """Test that converting back recovers the positions."""
        params = PhysicalParams(mass=0.5, hbar=2.0, omega=4.0)
        x = np.array([-1.0, 0.25, 3.0])
        np.testing.assert_allclose(from_dimensionless(to_dimensionless(x, params), params), x)

    def test_time_one_period(self):
        """Test that one physical period maps to T = 1."""
        params = PhysicalParams(omega=2.0)
        assert to_dimensionless_time(math.pi, params) == pytest.approx(1.0)
        assert from_dimensionless_time(1.0, params) == pytest.approx(math.pi)

    def test_frame_constants_are_identity(self):
        """Test that the frame constants convert positions and times to themselves."""
        frame = PhysicalParams.dimensionless()
        assert to_dimensionless(0.7, frame) == pytest.approx(0.7)
        assert to_dimensionless_time(0.3, frame) == pytest.approx(0.3)
        assert momentum_from_dimensionless(1.5, frame) == pytest.approx(1.5)
        assert energy_from_dimensionless(2.0, frame) == pytest.approx(2.0)

    def test_ground_energy_maps_to_half_hbar_omega(self):
        """Test that the frame ground energy converts to hbar omega / 2."""
        params = PhysicalParams(mass=1.0, hbar=1.0, omega=3.0)
        assert energy_from_dimensionless(4 * math.pi**2, params) == pytest.approx(1.5)
