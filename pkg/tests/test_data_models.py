"""Unit tests for the result data classes."""

import numpy as np
import pytest

from fsm_wiretap.data_models import (
    CapacityResult,
    InputLawFamily,
    PowerAllocation,
    RateCaps,
    Trajectory,
)

TEST_PI = np.array([0.25, 0.75])


def test_power_allocation_budget() -> None:
    """Budget used is the pi-weighted power."""
    allocation = PowerAllocation(p=np.array([40.0, 20.0]))
    assert allocation.budget_used(TEST_PI) == pytest.approx(25.0)  # noqa: S101
    assert not allocation.flagged  # noqa: S101


def test_input_law_family_uniform() -> None:
    """Uniform family has one row per delayed state."""
    family = InputLawFamily.uniform(3, 4)
    assert family.k == 3  # noqa: PLR2004, S101
    assert np.allclose(family.laws, 0.25)  # noqa: S101


def test_capacity_result_recomputed_value() -> None:
    """Stored weights and terms reproduce the value."""
    result = CapacityResult(
        value=0.55,
        argmax=InputLawFamily.uniform(2, 2),
        per_state_terms=np.array([[1.0, 0.0], [0.5, 0.5]]),
        weights=np.array([[0.3, 0.2], [0.1, 0.4]]),
        d=1,
        kind="discrete",
    )
    assert result.recomputed_value() == pytest.approx(0.55)  # noqa: S101


def test_rate_caps_corner() -> None:
    """Equivocation at the corner never exceeds the rate."""
    assert RateCaps(r_cap=0.4, re_cap=0.7).corner().re == pytest.approx(0.4)  # noqa: S101
    assert RateCaps(r_cap=0.4, re_cap=0.1).corner().re == pytest.approx(0.1)  # noqa: S101


def test_trajectory_length() -> None:
    """t is the number of channel uses."""
    zeros = np.zeros(7, dtype=int)
    traj = Trajectory(states=zeros, delayed=zeros, inputs=zeros, y=zeros, z=zeros, seed=0, d=0, k=2)
    assert traj.t == 7  # noqa: PLR2004, S101
