"""Unit tests for the information-measure engine."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsm_wiretap.channels import DiscreteWiretapChannel, bsc
from fsm_wiretap.exceptions import GuardrailError, ShapeError
from fsm_wiretap.infotheory import (
    SD,
    S,
    X,
    Y,
    Z,
    AuxiliaryScheme,
    JointTable,
    assemble_joint,
    cond_entropy,
    cond_mutual_info,
    csiszar_sum_check,
    degraded_identity_check,
    entropy,
    entropy_bits,
    key_rate_bound,
    mutual_info_bits,
    split_rate_region,
)
from fsm_wiretap.markov import StateChain, two_state
from tests.helpers import random_aux, random_chain, random_degraded_channel, random_stochastic

IDENTITY_TOL = 1e-9
IDENTITY_CASES = 100


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def random_table(rng: np.random.Generator, axes: tuple[str, ...], size: int = 2) -> JointTable:
    """Strictly positive joint with the given axis names."""
    probs = random_stochastic(rng, (size ** len(axes),)).reshape((size,) * len(axes))
    return JointTable(axes, probs)


def test_entropy_of_uniform() -> None:
    """Uniform law on four cells has two bits."""
    t = JointTable(("a", "b"), np.full((2, 2), 0.25))
    assert entropy(t, ["a", "b"]) == pytest.approx(2.0)  # noqa: S101
    assert cond_entropy(t, ["a"], ["b"]) == pytest.approx(1.0)  # noqa: S101
    assert cond_mutual_info(t, ["a"], ["b"]) == pytest.approx(0.0, abs=1e-12)  # noqa: S101


def test_joint_table_validation() -> None:
    """Mass, dimensions and axis names are checked."""
    with pytest.raises(ShapeError, match="mass"):
        JointTable(("a",), np.array([0.5, 0.6]))
    with pytest.raises(ShapeError, match="Duplicate"):
        JointTable(("a", "a"), np.full((2, 2), 0.25))
    with pytest.raises(ShapeError):
        JointTable(("a",), np.full((2, 2), 0.25))
    t = JointTable(("a",), np.array([0.5, 0.5]))
    with pytest.raises(ShapeError, match="Unknown axis"):
        entropy(t, ["b"])
    with pytest.raises(ShapeError, match="overlap"):
        cond_mutual_info(t, ["a"], ["a"])


def test_joint_table_dict_round_trip() -> None:
    """to_dict/from_dict keep axes and probabilities."""
    t = random_table(np.random.default_rng(0), ("a", "b", "c"))
    back = JointTable.from_dict(t.to_dict())
    assert back.axes == t.axes  # noqa: S101
    assert np.allclose(back.probs, t.probs)  # noqa: S101


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_chain_rule(seed: int) -> None:
    """I(A;B,C|D) = I(A;B|D) + I(A;C|B,D) on random joints."""
    t = random_table(np.random.default_rng(seed), ("a", "b", "c", "d"))
    whole = cond_mutual_info(t, ["a"], ["b", "c"], ["d"])
    parts = cond_mutual_info(t, ["a"], ["b"], ["d"]) + cond_mutual_info(t, ["a"], ["c"], ["b", "d"])
    assert whole == pytest.approx(parts, abs=IDENTITY_TOL)  # noqa: S101


def test_mutual_info_bits_bsc() -> None:
    """Uniform input through BSC(p) carries 1 - h(p)."""
    value = mutual_info_bits(np.array([0.5, 0.5]), bsc(0.11))
    assert float(value) == pytest.approx(1.0 - binary_entropy(0.11))  # noqa: S101
    assert entropy_bits(np.full(4, 0.25)) == pytest.approx(2.0)  # noqa: S101


def test_assemble_joint_marginals() -> None:
    """Assembled joint reproduces pi, K^d and the channel law."""
    rng = np.random.default_rng(4)
    chain = two_state(0.5, 2.0)
    ch = random_degraded_channel(rng)
    t = assemble_joint(chain, 2, random_aux(rng, chain.k, ch.nx), ch)
    assert t.marginal([S]) == pytest.approx(chain.pi)  # noqa: S101
    assert t.marginal([SD]) == pytest.approx(chain.pi)  # noqa: S101
    assert np.allclose(t.conditional([Y, Z], [S, X]), ch.table)  # noqa: S101


def test_assemble_joint_shape_mismatch() -> None:
    """Chain and channel must agree on the state count."""
    rng = np.random.default_rng(5)
    ch = random_degraded_channel(rng, ns=3)
    with pytest.raises(ShapeError, match="Axis s mismatch"):
        assemble_joint(two_state(0.5, 1.0), 1, random_aux(rng, 2, ch.nx), ch)


def test_degraded_identity_holds() -> None:
    """Both sides agree on seeded random degraded channels and auxiliaries, delays 0 to 5."""
    for seed in range(IDENTITY_CASES):
        rng = np.random.default_rng(seed)
        chain = random_chain(rng)
        ch = random_degraded_channel(rng)
        d = seed % 6
        check = degraded_identity_check(assemble_joint(chain, d, random_aux(rng, chain.k, ch.nx), ch))
        assert check.degraded, f"seed {seed}"  # noqa: S101
        assert check.residual <= IDENTITY_TOL, f"seed {seed}"  # noqa: S101


def test_identity_check_flags_leaky_channel() -> None:
    """An eavesdropper who sees x directly breaks the Markov condition."""
    table = np.zeros((1, 2, 2, 2))
    for x in range(2):
        table[0, x, :, x] = 0.5
    chain = StateChain.from_matrix([[1.0]])
    aux = AuxiliaryScheme.deterministic(np.array([[0.5, 0.5]]))
    check = degraded_identity_check(assemble_joint(chain, 0, aux, DiscreteWiretapChannel(table)))
    assert not check.degraded  # noqa: S101
    assert check.markov_residual == pytest.approx(1.0)  # noqa: S101


@pytest.mark.parametrize(("n", "cases"), [(1, 20), (2, 200), (3, 50)])
def test_csiszar_sum_identities(n: int, cases: int) -> None:
    """Both sum identities hold for seeded arbitrary joints over (w, y^n, z^n, s^n)."""
    axes = (
        "w",
        *(f"y{i}" for i in range(1, n + 1)),
        *(f"z{i}" for i in range(1, n + 1)),
        *(f"s{i}" for i in range(1, n + 1)),
    )
    for seed in range(cases):
        t = random_table(np.random.default_rng([n, seed]), axes)
        plain, with_message = csiszar_sum_check(t, n)
        assert plain <= IDENTITY_TOL, f"seed {seed}"  # noqa: S101
        assert with_message <= IDENTITY_TOL, f"seed {seed}"  # noqa: S101


def test_csiszar_guardrail() -> None:
    """Blocks longer than three are refused with a size estimate."""
    t = JointTable(("w",), np.array([1.0]))
    with pytest.raises(GuardrailError, match="cells"):
        csiszar_sum_check(t, 4)


def test_split_rate_region_direct_scheme() -> None:
    """With U trivial and V = X the caps reduce to the secrecy terms."""
    rng = np.random.default_rng(6)
    chain = two_state(0.5, 1.0)
    ch = random_degraded_channel(rng)
    t = assemble_joint(chain, 1, AuxiliaryScheme.direct(random_stochastic(rng, (2, 2))), ch)
    region = split_rate_region(t)
    i_y = cond_mutual_info(t, [X], [Y], [S, SD])
    i_z = cond_mutual_info(t, [X], [Z], [S, SD])
    assert region.common == pytest.approx(0.0, abs=1e-12)  # noqa: S101
    assert region.private == pytest.approx(i_y)  # noqa: S101
    assert region.equivocation == pytest.approx(i_y - i_z)  # noqa: S101
    bound = key_rate_bound(t)
    assert bound <= i_z + 1e-12  # noqa: S101
    assert bound <= cond_entropy(t, [Y], ["v", Z, S, SD]) + 1e-12  # noqa: S101


def test_deterministic_scheme_carries_nothing() -> None:
    """Singleton auxiliaries give an empty split region."""
    rng = np.random.default_rng(7)
    ch = random_degraded_channel(rng)
    t = assemble_joint(two_state(0.5, 1.0), 1, AuxiliaryScheme.deterministic(random_stochastic(rng, (2, 2))), ch)
    region = split_rate_region(t)
    assert region.private == pytest.approx(0.0, abs=1e-12)  # noqa: S101
    assert region.equivocation == pytest.approx(0.0, abs=1e-12)  # noqa: S101
