"""Unit tests for capacity-equivocation bounds and degraded region tracing."""

import math
import re

import numpy as np
import pytest

from fsm_wiretap.capacity import secrecy_capacity_discrete, secrecy_capacity_discrete_feedback
from fsm_wiretap.channels import DiscreteWiretapChannel, bsc, degraded_from
from fsm_wiretap.exceptions import DegradednessError, FactorizationError, ShapeError
from fsm_wiretap.infotheory import JOINT_AXES, AuxiliaryScheme, JointTable, assemble_joint
from fsm_wiretap.markov import delayed_joint, two_state
from fsm_wiretap.region import (
    check_channel_law,
    check_inner_factorization,
    eval_inner,
    eval_inner_feedback,
    eval_outer,
    eval_outer_feedback,
    factorization_residual,
    max_main_rate,
    trace_degraded_region,
)
from tests.helpers import MAIN_CROSSOVERS, binary_two_state_channel, random_aux, random_chain, random_degraded_channel

REGION_TOL = 1e-4
CORNER_TOL = 1e-6
N_POINTS = 17
CORNER_SEEDS = 10
SHARED_RATES = [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def sample_joint(seed: int = 0) -> tuple[JointTable, DiscreteWiretapChannel]:
    """Product-form joint over random auxiliaries and a random degraded channel."""
    rng = np.random.default_rng(seed)
    chain = two_state(0.5, 1.0)
    ch = random_degraded_channel(rng)
    return assemble_joint(chain, 1, random_aux(rng, chain.k, ch.nx), ch), ch


def state_copying_joint() -> JointTable:
    """Input copies the current state, which the transmitter cannot know."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    pair = delayed_joint(chain, 1).table
    probs = np.zeros((1, 1, 2, 2, 2, 2, 2))
    for sd in range(2):
        for s in range(2):
            probs[0, 0, sd, s, s] = pair[sd, s] * ch.table[s, s]
    return JointTable(JOINT_AXES, probs)


def test_product_joint_factors() -> None:
    """Assembled joints rebuild exactly from their own factors."""
    joint, ch = sample_joint()
    assert factorization_residual(joint) <= 1e-12  # noqa: PLR2004, S101
    check_inner_factorization(joint)
    check_channel_law(joint, ch)


def test_factorization_names_broken_chain() -> None:
    """A state-dependent input breaks X -> (U,V,S~) -> S."""
    with pytest.raises(FactorizationError, match=re.escape("X -> (U,V,S~) -> S")):
        check_inner_factorization(state_copying_joint())
    with pytest.raises(FactorizationError):
        eval_inner(state_copying_joint())


def test_outer_bound_accepts_any_joint() -> None:
    """The outer expressions only need the channel law, not the product form."""
    caps = eval_outer(state_copying_joint(), binary_two_state_channel())
    assert caps.r_cap >= 0.0  # noqa: S101
    assert caps.re_cap >= 0.0  # noqa: S101


def test_channel_law_mismatch() -> None:
    """A joint built on one channel is rejected against another."""
    joint, _ = sample_joint()
    other = degraded_from(np.stack([bsc(0.3), bsc(0.4)]), bsc(0.1))
    with pytest.raises(FactorizationError, match="channel law"):
        eval_outer(joint, other)
    with pytest.raises(FactorizationError):
        eval_outer_feedback(joint, other)


def test_missing_axes() -> None:
    """Bounds need the full (u, v, sd, s, x, y, z) axis set."""
    with pytest.raises(ShapeError, match="missing axes"):
        eval_outer(JointTable(("x", "y"), np.full((2, 2), 0.25)))


def test_inner_and_outer_agree_on_product_joints() -> None:
    """Without feedback both theorems evaluate the same expressions."""
    joint, ch = sample_joint(1)
    inner, outer = eval_inner(joint), eval_outer(joint, ch)
    assert inner.r_cap == pytest.approx(outer.r_cap)  # noqa: S101
    assert inner.re_cap == pytest.approx(outer.re_cap)  # noqa: S101
    assert inner.corner().re <= inner.corner().r  # noqa: S101


def test_feedback_raises_equivocation_cap() -> None:
    """The key term only adds equivocation."""
    joint, _ = sample_joint(2)
    plain, keyed = eval_inner(joint), eval_inner_feedback(joint)
    assert keyed.r_cap == pytest.approx(plain.r_cap)  # noqa: S101
    assert keyed.re_cap >= plain.re_cap  # noqa: S101


def test_direct_scheme_caps() -> None:
    """With U trivial and V = X the inner cap is the secrecy term of the input law."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    law = np.full((2, 2), 0.5)
    caps = eval_inner(assemble_joint(chain, 1, AuxiliaryScheme.direct(law), ch))
    capacity = secrecy_capacity_discrete(ch, chain, 1)
    assert caps.re_cap == pytest.approx(capacity.value, abs=1e-6)  # noqa: S101


def test_max_main_rate_binary() -> None:
    """Uniform inputs are optimal for every BSC state at once."""
    expected = sum(0.5 * (1.0 - binary_entropy(p)) for p in MAIN_CROSSOVERS)
    assert max_main_rate(binary_two_state_channel(), two_state(0.5, 1.0), 1) == pytest.approx(  # noqa: S101
        expected,
        abs=1e-9,
    )


def corner_of(points: list) -> float:
    """Largest equivocation on a boundary, which sits on the diagonal R = Re."""
    return max(p.re for p in points)


def test_region_contains_capacity_corner() -> None:
    """(C_s, C_s) is on the boundary and no point has more equivocation."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    capacity = secrecy_capacity_discrete(ch, chain, 1).value
    boundary = trace_degraded_region(ch, chain, 1, n_points=N_POINTS)
    corner = corner_of(boundary.points)
    assert boundary.kind == "degraded"  # noqa: S101
    assert corner == pytest.approx(capacity, abs=CORNER_TOL)  # noqa: S101
    assert any(abs(p.r - corner) <= 1e-9 and abs(p.re - corner) <= 1e-9 for p in boundary.points)  # noqa: PLR2004, S101
    assert all(p.re <= p.r + 1e-12 for p in boundary.points)  # noqa: S101
    rates = [p.r for p in boundary.points]
    assert rates == sorted(rates)  # noqa: S101
    assert len(boundary.points) <= N_POINTS + 1  # noqa: S101


def test_region_corner_matches_capacity_on_random_channels() -> None:
    """The region's own corner agrees with the capacity solver on seeded binary channels."""
    for seed in range(CORNER_SEEDS):
        rng = np.random.default_rng(seed)
        ch = random_degraded_channel(rng)
        chain = random_chain(rng)
        boundary = trace_degraded_region(ch, chain, 1, n_points=5)
        corner = corner_of(boundary.points)
        assert corner == pytest.approx(  # noqa: S101
            secrecy_capacity_discrete(ch, chain, 1).value,
            abs=CORNER_TOL,
        ), f"seed {seed}"
        assert any(abs(p.r - corner) <= 1e-9 for p in boundary.points), f"seed {seed}"  # noqa: PLR2004, S101


def test_feedback_corner_covers_feedback_capacity() -> None:
    """Time sharing across states only helps: the feedback corner is at least the feedback capacity."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    boundary = trace_degraded_region(ch, chain, 1, feedback=True, n_points=N_POINTS)
    expected = secrecy_capacity_discrete_feedback(ch, chain, 1).value
    assert corner_of(boundary.points) >= expected - REGION_TOL  # noqa: S101


def test_feedback_region_dominates() -> None:
    """On shared rates the feedback boundary is never below the plain one."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    plain = trace_degraded_region(ch, chain, 1, rates=SHARED_RATES)
    keyed = trace_degraded_region(ch, chain, 1, feedback=True, rates=SHARED_RATES)
    assert keyed.kind == "degraded-feedback"  # noqa: S101
    with_key = {p.r: p.re for p in keyed.points}
    without = {p.r: p.re for p in plain.points}
    shared = set(SHARED_RATES) & with_key.keys() & without.keys()
    assert shared  # noqa: S101
    for rate in shared:
        assert with_key[rate] >= without[rate] - REGION_TOL  # noqa: S101
    assert corner_of(keyed.points) >= corner_of(plain.points) - REGION_TOL  # noqa: S101


def test_region_threads_do_not_change_points() -> None:
    """Parallel tracing returns the same boundary in the same order."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    serial = trace_degraded_region(ch, chain, 1, n_points=N_POINTS)
    parallel = trace_degraded_region(ch, chain, 1, n_points=N_POINTS, threads=3)
    assert [(p.r, p.re) for p in serial.points] == [(p.r, p.re) for p in parallel.points]  # noqa: S101


def test_explicit_rates_are_clipped() -> None:
    """Requested rates above the largest achievable R are dropped."""
    chain = two_state(0.5, 1.0)
    ch = binary_two_state_channel()
    boundary = trace_degraded_region(ch, chain, 1, rates=[0.0, 0.1, 5.0])
    assert all(p.r < 5.0 for p in boundary.points)  # noqa: PLR2004, S101
    assert boundary.points[0].re == 0.0  # noqa: S101


def test_region_needs_witness() -> None:
    """Tables without a degradedness witness are refused."""
    ch = binary_two_state_channel()
    with pytest.raises(DegradednessError):
        trace_degraded_region(DiscreteWiretapChannel(ch.table), two_state(0.5, 1.0), 1)
