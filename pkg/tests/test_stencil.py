"""Tests for rational-smoothing stencil coefficients."""
import numpy as np
import pytest
import sympy

from miworlds.exceptions import (
    ConfigurationError,
    EnsembleSizeError,
    SingularSystemError,
    StencilError,
    StencilOrderError,
    UnderdeterminedStencilError,
)
from miworlds.stencil import (
    RESIDUAL_TOL,
    OffsetSet,
    build_stencil,
    default_offsets,
    one_sided_offsets,
    stencil_residual,
)


# =============================================================================
# OFFSET SET TESTS
# =============================================================================

class TestOffsetSet:
    """Test offset validation and helpers."""

    def test_symmetric_constructor(self):
        """Test offsets -h..-1, 1..h."""
        assert OffsetSet.symmetric(2).offsets == (-2, -1, 1, 2)

    def test_zero_rejected(self):
        """Test that a zero offset is rejected."""
        with pytest.raises(ConfigurationError, match="nonzero"):
            OffsetSet((-1, 0, 1))

    def test_duplicates_rejected(self):
        """Test that repeated offsets are rejected."""
        with pytest.raises(ConfigurationError, match="distinct"):
            OffsetSet((-1, 1, 1))

    def test_non_integer_rejected(self):
        """Test that fractional offsets are rejected."""
        with pytest.raises(ConfigurationError, match="integers"):
            OffsetSet((-1, 1.5))

    def test_empty_rejected(self):
        """Test that at least one offset is required."""
        with pytest.raises(ConfigurationError, match="at least one offset"):
            OffsetSet(())

    def test_reach(self):
        """Test symmetric flag and reach on each side."""
        offsets = OffsetSet((-1, 1, 2, 3))
        assert not offsets.is_symmetric
        assert offsets.reach == 3
        assert offsets.left_reach == 1
        assert offsets.right_reach == 3
        assert OffsetSet.symmetric(3).is_symmetric

    @pytest.mark.parametrize("order,expected", [(2, (-1, 1)), (3, (-2, -1, 1, 2)), (4, (-2, -1, 1, 2))])
    def test_default_offsets(self, order, expected):
        """Test the smallest symmetric set for each order."""
        assert default_offsets(order).offsets == expected


class TestOneSidedOffsets:
    """Test boundary offset selection."""

    def test_left_edge(self):
        """Test that the first world only looks right."""
        assert one_sided_offsets(0, 10, 4).offsets == (1, 2, 3, 4)

    def test_one_in_from_edge(self):
        """Test that nearer offsets on both sides come first."""
        assert one_sided_offsets(1, 10, 4).offsets == (-1, 1, 2, 3)

    def test_right_edge(self):
        """Test that the last world only looks left."""
        assert one_sided_offsets(5, 0, 2).offsets == (-2, -1)

    def test_too_few_neighbours(self):
        """Test that a short ensemble cannot host the stencil."""
        with pytest.raises(EnsembleSizeError, match="needs 4"):
            one_sided_offsets(1, 2, 4)


# =============================================================================
# BUILD STENCIL TESTS
# =============================================================================

class TestBuildStencil:
    """Test solving M A = D."""

    def test_order_two(self):
        """Test the L=2 central stencil."""
        stencil = build_stencil((-1, 1), 2)
        np.testing.assert_array_equal(stencil.alpha, [[-0.5, 1.0], [0.5, 1.0]])

    def test_order_four(self):
        """Test the L=4 stencil on +-1, +-2 against known difference weights."""
        stencil = build_stencil(OffsetSet.symmetric(2), 4)
        expected = np.array(
            [
                [1 / 12, -1 / 12, -0.5, 1.0],
                [-2 / 3, 4 / 3, 1.0, -4.0],
                [2 / 3, 4 / 3, -1.0, -4.0],
                [-1 / 12, -1 / 12, 0.5, 1.0],
            ]
        )
        np.testing.assert_allclose(stencil.alpha, expected, atol=1e-15)

    def test_exact_entries_are_rational(self):
        """Test that the exact solve keeps rational entries."""
        stencil = build_stencil(OffsetSet.symmetric(2), 4)
        assert stencil.rational[0, 0] == sympy.Rational(1, 12)
        assert stencil.rational[1, 2] == 1

    @pytest.mark.parametrize("order", range(2, 9))
    def test_residual_small(self, order):
        """Test that M alpha reproduces diag(l!) for orders 2..8."""
        stencil = build_stencil(default_offsets(order), order)
        assert stencil_residual(stencil) <= RESIDUAL_TOL

    @pytest.mark.parametrize("order", range(2, 9))
    def test_parity(self, order):
        """Test alpha(-c, l) = (-1)^l alpha(c, l) on symmetric offsets."""
        offsets = default_offsets(order)
        stencil = build_stencil(offsets, order)
        rows = {c: i for i, c in enumerate(offsets)}
        for c in offsets:
            for l in range(1, order + 1):
                assert stencil.alpha[rows[-c], l - 1] == pytest.approx(
                    (-1) ** l * stencil.alpha[rows[c], l - 1], abs=1e-12
                )

    @pytest.mark.parametrize("order", range(2, 9))
    def test_float_matches_exact(self, order):
        """Test that the floating-point solve agrees with the exact one."""
        offsets = default_offsets(order)
        exact = build_stencil(offsets, order, exact=True)
        approx = build_stencil(offsets, order, exact=False)
        assert approx.rational is None
        np.testing.assert_allclose(approx.alpha, exact.alpha, atol=1e-9)

    def test_overdetermined_uses_minimum_norm(self):
        """Test that C > L yields a solution satisfying the moment equations."""
        stencil = build_stencil(OffsetSet.symmetric(2), 2)
        assert stencil.alpha.shape == (4, 2)
        assert stencil_residual(stencil) <= RESIDUAL_TOL

    def test_one_sided_stencil(self):
        """Test an asymmetric boundary stencil."""
        stencil = build_stencil(one_sided_offsets(0, 5, 4), 4)
        assert stencil_residual(stencil) <= RESIDUAL_TOL

    @pytest.mark.parametrize("order", [1, 0, -2, 2.5, True])
    def test_bad_order(self, order):
        """Test that L must be an integer of at least 2."""
        with pytest.raises(StencilOrderError, match="L >= 2"):
            build_stencil((-1, 1), order)

    def test_underdetermined(self):
        """Test that fewer offsets than orders is rejected."""
        with pytest.raises(UnderdeterminedStencilError, match="need C >= L"):
            build_stencil((-1, 1), 4)

    def test_errors_share_base(self):
        """Test that stencil failures are StencilError."""
        assert issubclass(UnderdeterminedStencilError, StencilError)
        assert issubclass(SingularSystemError, StencilError)
        assert issubclass(StencilOrderError, StencilError)

    def test_weights_column(self):
        """Test access to the weights of one derivative."""
        stencil = build_stencil((-1, 1), 2)
        assert stencil.weights(2).tolist() == [1.0, 1.0]

    def test_alpha_read_only(self):
        """Test that coefficients are frozen."""
        stencil = build_stencil((-1, 1), 2)
        with pytest.raises(ValueError):
            stencil.alpha[0, 0] = 3.0

    def test_perturbed_breaks_residual(self):
        """Test that a perturbed copy fails the moment equations."""
        stencil = build_stencil((-1, 1), 2).perturbed(0, 0, 1e-3)
        assert stencil_residual(stencil) == pytest.approx(1e-3)
