"""Unit tests for the toy multiplexed wiretap codec."""

import numpy as np
import pytest

from fsm_wiretap import codec
from fsm_wiretap.channels import bsc, degraded_from
from fsm_wiretap.codec import (
    KeyMap,
    analytic_secrecy_rate,
    build_code,
    component_lengths,
    decode,
    delayed_states,
    encode,
    exact_equivocation,
    generate_key,
    golden_block,
    key_bits_for,
    run_blocks,
)
from fsm_wiretap.exceptions import DomainError, GuardrailError
from fsm_wiretap.markov import StateChain, two_state
from fsm_wiretap.records import golden_dump, golden_load
from tests.helpers import binary_two_state_channel, random_stochastic

BLOCK_LENGTH = 10
SEED = 0
# 4 codeword bits per component, 1 of them randomization: 3 message bits per 5 uses.
RATES = (0.8,)
BINNING_RATES = (0.2,)
MESSAGE_RATE = 0.6
ANALYTIC_RATE = 0.5488
EQUIVOCATION_SLACK = 0.15
KEY_SAMPLES = 10_000
# 1 bit in the first component only, well under half of ANALYTIC_RATE.
LOW_RATES = (1 / 6, 0.0)
DECODE_LENGTH = 12
DECODE_SEEDS = 10
DECODE_BLOCKS = 100
GAIN_SLACK = 0.2
GOLDEN_LENGTH = 6


def memoryless() -> StateChain:
    """Single-state chain."""
    return StateChain.from_matrix([[1.0]])


def reference_code(d: int = 1, **kwargs):  # noqa: ANN003, ANN201
    """Binary two-state code of length 10 on the reference channel."""
    options = {"binning_rates": BINNING_RATES, **kwargs}
    return build_code(binary_two_state_channel(), two_state(0.5, 1.0), d, RATES, BLOCK_LENGTH, SEED, **options)


def test_component_lengths() -> None:
    """Largest-remainder rounding keeps the total at N."""
    assert component_lengths(np.array([0.5, 0.5]), 10).tolist() == [5, 5]  # noqa: S101
    assert component_lengths(np.array([0.7, 0.3]), 12).tolist() == [8, 4]  # noqa: S101
    assert component_lengths(np.array([1 / 3, 1 / 3, 1 / 3]), 10).sum() == 10  # noqa: PLR2004, S101


def test_delayed_states() -> None:
    """Positions before the delay read state 0."""
    assert delayed_states(np.array([1, 0, 1, 1]), 2).tolist() == [0, 0, 1, 0]  # noqa: S101
    assert delayed_states(np.array([1, 1]), 0).tolist() == [1, 1]  # noqa: S101
    assert delayed_states(np.array([[1, 0, 1]]), 5).tolist() == [[0, 0, 0]]  # noqa: S101


def test_code_structure() -> None:
    """Bits per component follow from the rates and the component lengths."""
    code = reference_code()
    assert code.lengths.tolist() == [5, 5]  # noqa: S101
    assert code.a_bits.tolist() == [3, 3]  # noqa: S101
    assert code.b_bits.tolist() == [1, 1]  # noqa: S101
    assert code.message_rate == pytest.approx(MESSAGE_RATE)  # noqa: S101
    assert code.sizes(0) == (8, 2, 1)  # noqa: S101
    assert code.codebooks[0].shape == (16, 5)  # noqa: S101
    assert code.bin_sizes(1).tolist() == [2]  # noqa: S101


def test_codebooks_are_seeded_and_nested() -> None:
    """Equal seeds repeat codebooks; a lower rate uses a prefix of a higher one."""
    ch = degraded_from(np.stack([bsc(0.05)]), bsc(0.2))
    small = build_code(ch, memoryless(), 0, [1 / 12], 12, SEED)
    large = build_code(ch, memoryless(), 0, [0.5], 12, SEED)
    again = build_code(ch, memoryless(), 0, [0.5], 12, SEED)
    assert np.array_equal(large.codebooks[0], again.codebooks[0])  # noqa: S101
    assert np.array_equal(small.codebooks[0], large.codebooks[0][:2])  # noqa: S101
    assert not large.codebooks[0].flags.writeable  # noqa: S101


def test_build_code_guardrails() -> None:
    """Toy limits and bit budgets are enforced."""
    ch = degraded_from(np.stack([bsc(0.05)]), bsc(0.2))
    with pytest.raises(GuardrailError, match="Block length"):
        build_code(ch, memoryless(), 0, [0.5], 13, SEED)
    with pytest.raises(GuardrailError, match="codewords"):
        build_code(ch, memoryless(), 0, [2.0], 12, SEED)
    wide = degraded_from(random_stochastic(np.random.default_rng(0), (1, 4, 2)), bsc(0.2))
    with pytest.raises(GuardrailError, match="alphabets"):
        build_code(wide, memoryless(), 0, [0.5], 8, SEED)
    with pytest.raises(DomainError, match="Binning bits"):
        build_code(ch, memoryless(), 0, [0.25], 12, SEED, binning_rates=[0.5])
    with pytest.raises(DomainError, match="Bin message bits"):
        build_code(ch, memoryless(), 0, [0.5], 12, SEED, binning_rates=[0.25], bin_message_rates=[0.5])


def test_noiseless_round_trip() -> None:
    """Identity links decode every message, with and without a key."""
    ch = degraded_from(np.eye(2)[None], np.eye(2))
    code = build_code(ch, memoryless(), 0, [3 / 12], 12, SEED, binning_rates=[2 / 12], bin_message_rates=[1 / 12])
    states = np.zeros(12, dtype=int)
    rng = np.random.default_rng(1)
    for messages, keys in (([(1, 1)], None), ([(0, 1)], [1]), ([(1, 0)], [1])):
        x = encode(code, messages, states, keys=keys, rng=rng)
        decoded = decode(code, x, states, states, keys=keys)
        assert decoded.messages == messages  # noqa: S101


def test_encode_rejects_out_of_range() -> None:
    """Message and key indices must fit their alphabets."""
    code = reference_code()
    delayed = np.zeros(BLOCK_LENGTH, dtype=int)
    with pytest.raises(DomainError, match="out of range"):
        encode(code, [(8, 0), (0, 0)], delayed)
    with pytest.raises(DomainError, match="Key"):
        encode(code, [(0, 0), (0, 0)], delayed, keys=[1, 0])


def test_noiseless_channel_has_no_errors() -> None:
    """Every block decodes over identity links."""
    ch = degraded_from(np.eye(2)[None], np.eye(2))
    for rate in (1 / 12, 2 / 12):
        code = build_code(ch, memoryless(), 0, [rate], 12, SEED)
        assert run_blocks(code, memoryless(), 50).error_rate == 0.0  # noqa: S101


def test_pure_noise_channel_guesses() -> None:
    """When y is independent of x the decoder always picks index 0."""
    ch = degraded_from(np.full((1, 2, 2), 0.5), bsc(0.1))
    code = build_code(ch, memoryless(), 0, [2 / 12], 12, SEED)
    report = run_blocks(code, memoryless(), 2000)
    assert report.error_rate == pytest.approx(0.75, abs=0.05)  # noqa: S101


def test_reference_code_decodes_at_half_the_secrecy_rate() -> None:
    """One message bit per block on the reference channel decodes with error below 0.1 over 1000 blocks."""
    chain = two_state(0.5, 1.0)
    errors = []
    for seed in range(DECODE_SEEDS):
        code = build_code(binary_two_state_channel(), chain, 1, LOW_RATES, DECODE_LENGTH, seed)
        assert code.message_rate <= ANALYTIC_RATE / 2  # noqa: S101
        errors.append(run_blocks(code, chain, DECODE_BLOCKS).error_rate)
    assert np.mean(errors) < 0.1  # noqa: PLR2004, S101


def test_error_rate_falls_with_rate() -> None:
    """Nested codes at 6, 1 and 0 bits have non-increasing error rates."""
    ch = degraded_from(np.stack([bsc(0.1)]), bsc(0.2))
    errors = [
        run_blocks(build_code(ch, memoryless(), 0, [rate], 12, SEED), memoryless(), 200).error_rate
        for rate in (0.5, 1 / 12, 0.0)
    ]
    assert errors == sorted(errors, reverse=True)  # noqa: S101
    assert errors[-1] == 0.0  # noqa: S101


def test_analytic_rate() -> None:
    """Uniform inputs on the reference channel give h(p*q) - h(p) averaged over states."""
    assert analytic_secrecy_rate(reference_code(), two_state(0.5, 1.0)) == pytest.approx(  # noqa: S101
        ANALYTIC_RATE,
        abs=1e-3,
    )


def test_equivocation_bounds() -> None:
    """Exact equivocation sits between the leakage bound and the message rate."""
    code = reference_code()
    value = exact_equivocation(code, code.ch, two_state(0.5, 1.0), 1)
    assert ANALYTIC_RATE - EQUIVOCATION_SLACK <= value <= MESSAGE_RATE + 1e-9  # noqa: S101


def test_equivocation_threads_agree() -> None:
    """Parallel enumeration returns the serial value."""
    code = reference_code()
    chain = two_state(0.5, 1.0)
    serial = exact_equivocation(code, code.ch, chain, 1)
    assert exact_equivocation(code, code.ch, chain, 1, threads=4) == pytest.approx(serial, abs=1e-12)  # noqa: S101


def test_zero_rate_has_no_equivocation() -> None:
    """No message bits, nothing to hide."""
    code = build_code(binary_two_state_channel(), two_state(0.5, 1.0), 1, [0.0], BLOCK_LENGTH, SEED)
    assert exact_equivocation(code, code.ch, two_state(0.5, 1.0), 1) == 0.0  # noqa: S101


def test_blind_eavesdropper_learns_nothing() -> None:
    """When z is independent of x the whole message stays hidden."""
    ch = degraded_from(np.stack([bsc(0.02), bsc(0.1)]), np.full((2, 2), 0.5))
    chain = two_state(0.5, 1.0)
    code = build_code(ch, chain, 1, RATES, BLOCK_LENGTH, SEED, binning_rates=BINNING_RATES)
    assert exact_equivocation(code, ch, chain, 1) == pytest.approx(code.message_rate, abs=1e-9)  # noqa: S101


def test_equivocation_guardrail() -> None:
    """Blocks too long to enumerate are refused with a size estimate."""
    rng = np.random.default_rng(3)
    ch = degraded_from(np.stack([bsc(0.02), bsc(0.1)]), random_stochastic(rng, (2, 3)))
    chain = two_state(0.5, 1.0)
    code = build_code(ch, chain, 1, [0.5], 12, SEED)
    with pytest.raises(GuardrailError, match="enumeration"):
        exact_equivocation(code, ch, chain, 1)


def test_key_bits() -> None:
    """ceil(length * rate) bits, with exact products not rounded up."""
    assert key_bits_for(20, 0.05) == 1  # noqa: S101
    assert key_bits_for(5, 0.3) == 2  # noqa: PLR2004, S101
    assert key_bits_for(5, 0.0) == 0  # noqa: S101
    with pytest.raises(DomainError):
        key_bits_for(5, -0.1)


def test_generate_key_is_balanced() -> None:
    """One-bit keys from uniform 20-symbol blocks are close to fair."""
    rng = np.random.default_rng(4)
    keys = [generate_key(rng.integers(0, 2, 20), 0.05, SEED) for _ in range(KEY_SAMPLES)]
    assert set(keys) <= {0, 1}  # noqa: S101
    assert abs(np.mean(keys) - 0.5) < 0.02  # noqa: PLR2004, S101


def test_generate_key_is_deterministic() -> None:
    """Equal received blocks give equal keys; zero rate gives key 0."""
    y = np.array([0, 1, 1, 0, 1, 0, 0, 1] * 2)
    assert generate_key(y, 0.25, SEED) == generate_key(y.copy(), 0.25, SEED)  # noqa: S101
    assert generate_key(y, 0.0, SEED) == 0  # noqa: S101
    assert 0 <= generate_key(y, 0.25, SEED) < 16  # noqa: PLR2004, S101


def test_key_map_caps_at_bin_bits(mocker) -> None:  # noqa: ANN001
    """Requested key bits beyond the bin index are capped with a warning."""
    mock_logger = mocker.patch("fsm_wiretap.codec.logger")
    code = reference_code(binning_rates=[0.4], bin_message_rates=[0.2])
    key_map = KeyMap.for_code(code, [0.5], SEED)
    assert key_map.key_bits.tolist() == [1, 1]  # noqa: S101
    mock_logger.warning.assert_called_once()


def test_feedback_key_never_lowers_equivocation() -> None:
    """Keying the bin index only adds confusion for the eavesdropper."""
    chain = two_state(0.5, 1.0)
    code = reference_code(binning_rates=[0.4], bin_message_rates=[0.2])
    assert code.j_bits.tolist() == [1, 1]  # noqa: S101
    key_map = KeyMap.for_code(code, [0.1], SEED)
    assert key_map.rate(code.n) == pytest.approx(0.2)  # noqa: S101

    report = run_blocks(code, chain, 6, key_map=key_map)
    assert report.feedback  # noqa: S101
    assert report.keyed_blocks == 4  # noqa: PLR2004, S101
    assert report.key_rate == pytest.approx(0.2)  # noqa: S101
    assert report.equivocation >= report.unkeyed_equivocation - 1e-12  # noqa: S101
    assert report.equivocation <= report.message_rate + 1e-9  # noqa: S101


def test_run_blocks_report() -> None:
    """Reports carry the code's rates and the analytic target."""
    code = reference_code()
    report = run_blocks(code, two_state(0.5, 1.0), 20)
    assert report.blocks == 20  # noqa: PLR2004, S101
    assert report.message_rate == pytest.approx(MESSAGE_RATE)  # noqa: S101
    assert report.analytic_target == pytest.approx(ANALYTIC_RATE, abs=1e-3)  # noqa: S101
    assert report.equivocation == report.unkeyed_equivocation  # noqa: S101
    assert not report.feedback  # noqa: S101
    assert 0.0 <= report.error_rate <= 1.0  # noqa: S101
    with pytest.raises(DomainError):
        run_blocks(code, two_state(0.5, 1.0), 0)


def test_feedback_key_gain_on_exposed_channel() -> None:
    """With the eavesdropper seeing Y, a full-width key lifts equivocation by nearly the key rate."""
    ch = degraded_from(np.stack([np.eye(2), bsc(0.02)]), np.eye(2))
    chain = two_state(0.5, 1.0)
    # 2 bin bits per component, all of them message, no confidential index
    code = build_code(ch, chain, 1, [1 / 3], 12, SEED, binning_rates=[1 / 3], bin_message_rates=[1 / 3])
    assert code.a_bits.tolist() == [0, 0]  # noqa: S101
    assert code.j_bits.tolist() == [2, 2]  # noqa: S101
    key_map = KeyMap.for_code(code, [1 / 3], SEED)
    assert key_map.key_bits.tolist() == [2, 2]  # noqa: S101

    report = run_blocks(code, chain, 4, key_map=key_map)
    assert report.keyed_blocks == 2  # noqa: PLR2004, S101
    assert report.equivocation == pytest.approx(code.message_rate, abs=1e-9)  # noqa: S101
    assert report.equivocation >= report.unkeyed_equivocation + report.key_rate - GAIN_SLACK  # noqa: S101


def test_run_blocks_is_deterministic() -> None:
    """Equal seeds repeat the report, worker threads do not change it, other seeds draw other codebooks."""
    chain = two_state(0.5, 1.0)
    code = reference_code()
    first = run_blocks(code, chain, 30)
    assert run_blocks(code, chain, 30) == first  # noqa: S101
    assert run_blocks(code, chain, 30, threads=4) == first  # noqa: S101
    rebuilt = reference_code()
    assert all(np.array_equal(a, b) for a, b in zip(code.codebooks, rebuilt.codebooks, strict=True))  # noqa: S101
    other = build_code(code.ch, chain, 1, RATES, BLOCK_LENGTH, SEED + 1, binning_rates=BINNING_RATES)
    assert any(not np.array_equal(a, b) for a, b in zip(code.codebooks, other.codebooks, strict=True))  # noqa: S101


def test_golden_block_matches_first_sent_block(mocker) -> None:  # noqa: ANN001
    """The golden vector of a length-6 two-state code is the first block run_blocks transmits."""
    chain = two_state(0.5, 1.0)
    code = build_code(binary_two_state_channel(), chain, 1, RATES, GOLDEN_LENGTH, SEED, binning_rates=BINNING_RATES)
    spy = mocker.spy(codec, "encode")
    run_blocks(code, chain, 1)
    sent = spy.spy_return.tolist()
    assert len(sent) == GOLDEN_LENGTH  # noqa: S101

    text = golden_dump(golden_block(code, chain), SEED)
    assert golden_load(text) == (SEED, sent)  # noqa: S101
    assert golden_dump(sent, SEED) == text  # noqa: S101
