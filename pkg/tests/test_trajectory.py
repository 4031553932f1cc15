"""
Tests for time grids and trajectories.
"""

import numpy as np
import pytest

from spde_limits.errors import ConfigurationError, GridMismatchError
from spde_limits.spectral import FourierGrid, SpectralField, from_function
from spde_limits.trajectory import Trajectory, snapshot_times, uniform_steps
from tests.conftest import constant_trajectory


@pytest.mark.unit
class TestTimeGrid:
    """Test step counts and snapshot times."""

    def test_uniform_steps(self):
        """T/dt must be an integer within 1e-9 relative."""
        assert uniform_steps(0.5, 1e-3) == 500
        assert uniform_steps(1.0, 0.1) == 10

    @pytest.mark.parametrize("T,dt", [(1.0, 0.3), (0.1, 0.2), (0.0, 0.1), (1.0, -0.1)])
    def test_bad_time_grids(self, T, dt):
        """Non-multiples, dt > T and non-positive values raise."""
        with pytest.raises(ConfigurationError):
            uniform_steps(T, dt)

    def test_snapshot_times(self):
        """Every save_every-th step is stored, T included."""
        np.testing.assert_allclose(snapshot_times(1.0, 4, 2), [0.0, 0.5, 1.0])

    def test_save_every_must_divide_steps(self):
        """A stride that misses T raises."""
        with pytest.raises(ConfigurationError):
            snapshot_times(1.0, 5, 2)


@pytest.mark.unit
class TestTrajectory:
    """Test snapshot stacks and their norms."""

    def test_norms_of_constant_field(self, grid8):
        """‖1‖_{L²} = ‖1‖_{H^{-1}} = sup|1| = 1 on the normalized torus."""
        one = from_function(grid8, lambda x1, x2: np.ones_like(x1))
        traj = constant_trajectory(one, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(traj.l2, 1.0)
        np.testing.assert_allclose(traj.h_minus1, 1.0)
        np.testing.assert_allclose(traj.sup, 1.0)
        assert traj.T == 1.0
        assert traj.dt == 0.5

    def test_norm_rows(self, grid8):
        """One row per snapshot with t, l2, h_minus1 and sup."""
        traj = constant_trajectory(SpectralField.zeros(grid8), [0.0, 0.1])
        rows = traj.norm_rows()
        assert [row["t"] for row in rows] == [0.0, 0.1]
        assert set(rows[0]) == {"t", "l2", "h_minus1", "sup"}

    def test_index_of_time(self, grid8):
        """Stored times resolve to their index; others raise."""
        traj = constant_trajectory(SpectralField.zeros(grid8), [0.0, 0.25, 0.5])
        assert traj.index_of_time(0.25) == 1
        assert traj.index_of_time(0.5) == 2
        with pytest.raises(ConfigurationError):
            traj.index_of_time(0.3)
        with pytest.raises(ConfigurationError):
            traj.index_of_time(0.75)

    def test_validation(self, grid8):
        """Shapes must agree and times start at 0 and increase."""
        coeffs = np.zeros((2, 8, 8), dtype=complex)
        with pytest.raises(GridMismatchError):
            Trajectory(grid8, np.array([0.0, 1.0, 2.0]), coeffs)
        with pytest.raises(GridMismatchError):
            Trajectory(grid8, np.array([0.0, 1.0]), np.zeros((2, 4, 4), dtype=complex))
        with pytest.raises(ConfigurationError):
            Trajectory(grid8, np.array([0.1, 1.0]), coeffs)

    def test_combine_requires_matching_grids(self, grid8):
        """Different time grids or spatial grids raise GridMismatchError."""
        a = constant_trajectory(SpectralField.zeros(grid8), [0.0, 0.5])
        b = constant_trajectory(SpectralField.zeros(grid8), [0.0, 0.25])
        c = constant_trajectory(SpectralField.zeros(FourierGrid(16)), [0.0, 0.5])
        with pytest.raises(GridMismatchError):
            a.combine(b, 1.0, "sum")
        with pytest.raises(GridMismatchError):
            a.combine(c, 1.0, "sum")

    def test_combine(self, grid8):
        """coeffs + sign·other.coeffs."""
        one = from_function(grid8, lambda x1, x2: np.ones_like(x1))
        a = constant_trajectory(one, [0.0, 0.5])
        diff = a.combine(a, -1.0, "diff")
        assert not np.any(diff.coeffs)
        assert diff.label == "diff"
