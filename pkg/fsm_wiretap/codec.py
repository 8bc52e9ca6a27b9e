"""Toy multiplexed random-binning wiretap code with exact equivocation.

Each delayed state s~ owns a component codebook of length N_s~. A component
codeword is indexed by (a, r, j): ``a`` is the confidential index, ``j`` the
bin carrying the remaining message bits, and ``r`` the randomization inside
the bin. With output feedback the bin index is sent as ``j XOR key`` where the
key is hashed from the receiver's output of an earlier block.

Block lengths are tiny (N <= 12) so decoding is exact MAP and the
eavesdropper's equivocation is computed by full enumeration.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from fsm_wiretap.capacity import discrete_state_terms
from fsm_wiretap.channels import sample_outputs
from fsm_wiretap.data_models import DecodedBlock, RunReport
from fsm_wiretap.exceptions import DomainError, GuardrailError, ShapeError
from fsm_wiretap.infotheory import LN2, AuxiliaryScheme, assemble_joint, entropy_bits, key_rate_bound
from fsm_wiretap.markov import power, sample_path
from fsm_wiretap.workers import ordered_map

if TYPE_CHECKING:
    from collections.abc import Sequence

    from fsm_wiretap.channels import DiscreteWiretapChannel
    from fsm_wiretap.config import ExperimentConfig
    from fsm_wiretap.markov import StateChain

logger = logging.getLogger(__name__)

MAX_ALPHABET = 3
MAX_STATES = 3
MAX_BLOCK_LENGTH = 12
MAX_CODEBOOK_WORDS = 2**16
MAX_ENUMERATION = 2**24
RATE_TOL = 1e-9

# Fixed labels for the per-purpose random streams derived from the root seed.
STREAM_LABELS = {
    "state": 1,
    "input": 2,
    "channel": 3,
    "codebook": 4,
    "message": 5,
}

_MASK64 = (1 << 64) - 1


def rng_stream(seed: int, label: str, *extra: int) -> np.random.Generator:
    """Independent generator for one purpose; adding a purpose never shifts another's draws."""
    return np.random.default_rng([seed, STREAM_LABELS[label], *extra])


def component_lengths(pi: np.ndarray, n: int) -> np.ndarray:
    """N_s~ = round(N pi(s~)) with largest-remainder correction so the lengths sum to N."""
    raw = n * np.asarray(pi, dtype=float)
    lengths = np.floor(raw).astype(np.intp)
    order = np.argsort(-(raw - lengths), kind="stable")
    lengths[order[: n - int(lengths.sum())]] += 1
    return lengths


def delayed_states(states: np.ndarray, d: int) -> np.ndarray:
    """s_{i-d} at position i, and the constant state 0 while i < d."""
    states = np.asarray(states, dtype=np.intp)
    delayed = np.zeros_like(states)
    if d < states.shape[-1]:
        delayed[..., d:] = states[..., : states.shape[-1] - d]
    return delayed


@dataclass(frozen=True, eq=False)
class MultiplexCode:
    """Component codebooks, one per delayed state, with their bin structure.

    ``codebooks[s]`` has shape (2**(a_bits[s] + b_bits[s]), lengths[s]); the
    codeword for (a, r, j) sits at row a * B + r * J + j with B = 2**b_bits[s]
    and J = 2**j_bits[s].
    """

    ch: DiscreteWiretapChannel
    lengths: np.ndarray
    a_bits: np.ndarray
    b_bits: np.ndarray
    j_bits: np.ndarray
    codebooks: tuple[np.ndarray, ...]
    input_law: np.ndarray
    seed: int
    d: int

    @property
    def n(self) -> int:
        """Block length N."""
        return int(self.lengths.sum())

    @property
    def k(self) -> int:
        """Number of components (delayed states)."""
        return self.lengths.size

    @property
    def message_rate(self) -> float:
        """Message bits per channel use, sum of a_bits + j_bits over N."""
        return float((self.a_bits + self.j_bits).sum()) / self.n

    def sizes(self, s: int) -> tuple[int, int, int]:
        """(messages A, randomizations per bin R, bins J) of component s."""
        bins = 1 << int(self.j_bits[s])
        return 1 << int(self.a_bits[s]), (1 << int(self.b_bits[s])) // bins, bins

    def bin_sizes(self, s: int) -> np.ndarray:
        """Number of randomization indices in each bin of component s."""
        _, per_bin, bins = self.sizes(s)
        return np.full(bins, per_bin)

    def row(self, s: int, a: int, r: int, j: int) -> int:
        """Codebook row of (a, r, j) in component s."""
        _, per_bin, bins = self.sizes(s)
        return (a * per_bin + r) * bins + j


def _bits(rates: Sequence[float], lengths: np.ndarray, name: str) -> np.ndarray:
    rates = np.asarray(rates if len(rates) else [0.0], dtype=float)
    if rates.size == 1:
        rates = np.full(lengths.size, rates[0])
    if rates.size != lengths.size:
        msg = f"Expected one {name} per delayed state ({lengths.size}), got {rates.size}"
        raise ShapeError(msg)
    if np.any(rates < 0):
        msg = f"{name.capitalize()} must be non-negative, got {rates.tolist()}"
        raise DomainError(msg)
    return np.rint(lengths * rates).astype(np.intp)


def _check_input_law(input_law: np.ndarray | None, k: int, nx: int) -> np.ndarray:
    if input_law is None:
        return np.full((k, nx), 1.0 / nx)
    law = np.asarray(input_law, dtype=float)
    if law.ndim == 1:
        law = np.tile(law, (k, 1))
    if law.shape != (k, nx):
        msg = f"Input law has shape {law.shape}, expected (delayed states, inputs) = {(k, nx)}"
        raise ShapeError(msg)
    if np.any(law < 0) or np.max(np.abs(law.sum(axis=1) - 1.0)) > RATE_TOL:
        msg = "Input law P(x|s~) is not row-stochastic"
        raise DomainError(msg)
    return law


def build_code(  # noqa: PLR0913
    ch: DiscreteWiretapChannel,
    chain: StateChain,
    d: int,
    rates: Sequence[float],
    n: int,
    seed: int,
    *,
    binning_rates: Sequence[float] = (),
    bin_message_rates: Sequence[float] = (),
    input_law: np.ndarray | None = None,
) -> MultiplexCode:
    """Draw i.i.d. component codebooks from P(x|s~).

    Args:
        ch: Discrete wiretap channel the code is used on.
        chain: State process; its stationary law sets the component lengths.
        d: Feedback delay.
        rates: Codeword rate (a plus randomization bits over N_s~) per delayed state.
        n: Block length N.
        seed: Root seed; the same seed always gives the same codebooks.
        binning_rates: Randomization rate b per delayed state.
        bin_message_rates: Rate of the message bits carried by the bin index, at most the binning rate.
        input_law: P(x|s~) of shape (k, nx); uniform when omitted.

    Raises:
        GuardrailError: Alphabets, block length or total codebook size exceed the toy limits.
    """
    if d < 0:
        msg = f"Delay must be non-negative, got {d}"
        raise DomainError(msg)
    if ch.ns != chain.k:
        msg = f"Axis s mismatch: channel has {ch.ns} states, chain has {chain.k}"
        raise ShapeError(msg)
    if max(ch.nx, ch.ny, ch.nz) > MAX_ALPHABET or chain.k > MAX_STATES:
        msg = (
            f"Toy codec supports alphabets up to {MAX_ALPHABET} and {MAX_STATES} states, "
            f"got (x, y, z) = {(ch.nx, ch.ny, ch.nz)} with {chain.k} states"
        )
        raise GuardrailError(msg)
    if not 1 <= n <= MAX_BLOCK_LENGTH:
        msg = f"Block length N={n} outside 1..{MAX_BLOCK_LENGTH}"
        raise GuardrailError(msg)

    lengths = component_lengths(chain.pi, n)
    total = _bits(rates, lengths, "rate")
    b_bits = _bits(binning_rates, lengths, "binning rate")
    j_bits = _bits(bin_message_rates, lengths, "bin message rate")
    if np.any(b_bits > total):
        msg = f"Binning bits {b_bits.tolist()} exceed codeword bits {total.tolist()}"
        raise DomainError(msg)
    if np.any(j_bits > b_bits):
        msg = f"Bin message bits {j_bits.tolist()} exceed binning bits {b_bits.tolist()}"
        raise DomainError(msg)

    words = int(np.sum(np.left_shift(1, total)))
    if words > MAX_CODEBOOK_WORDS:
        estimate = words * int(lengths.max()) * np.dtype(np.intp).itemsize
        msg = f"Code needs {words} codewords (about {estimate / 2**20:.1f} MiB), above the {MAX_CODEBOOK_WORDS} limit"
        raise GuardrailError(msg)

    law = _check_input_law(input_law, chain.k, ch.nx)
    codebooks = []
    for s in range(chain.k):
        # row-major uniforms: the codebook of a lower rate is a prefix of a higher one
        uniforms = rng_stream(seed, "codebook", s).random((1 << int(total[s]), int(lengths[s])))
        cdf = np.cumsum(law[s])
        book = np.minimum(np.searchsorted(cdf, uniforms, side="right"), ch.nx - 1).astype(np.intp)
        book.setflags(write=False)
        codebooks.append(book)

    code = MultiplexCode(
        ch=ch,
        lengths=lengths,
        a_bits=total - b_bits,
        b_bits=b_bits,
        j_bits=j_bits,
        codebooks=tuple(codebooks),
        input_law=law,
        seed=seed,
        d=d,
    )
    logger.debug(
        "Built multiplexed code: N=%d, lengths=%s, a=%s, b=%s, j=%s",
        n,
        lengths.tolist(),
        code.a_bits.tolist(),
        b_bits.tolist(),
        j_bits.tolist(),
    )
    return code


def _check_block(code: MultiplexCode, sequence: np.ndarray, name: str) -> np.ndarray:
    sequence = np.asarray(sequence, dtype=np.intp)
    if sequence.shape != (code.n,):
        msg = f"{name} has shape {sequence.shape}, expected ({code.n},)"
        raise ShapeError(msg)
    if np.any(sequence < 0) or np.any(sequence >= code.k):
        msg = f"{name} contains states outside 0..{code.k - 1}"
        raise DomainError(msg)
    return sequence


def _positions(code: MultiplexCode, delayed: np.ndarray, s: int) -> np.ndarray:
    """Block positions carrying component s, truncated to its codeword length."""
    return np.flatnonzero(delayed == s)[: int(code.lengths[s])]


def encode(
    code: MultiplexCode,
    messages: Sequence[tuple[int, int]],
    delayed: np.ndarray,
    *,
    keys: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Multiplex the component codewords along the delayed state sequence.

    Positions a component cannot fill are sent as symbol 0. The randomization
    index inside the bin is drawn from ``rng``.
    """
    delayed = _check_block(code, delayed, "Delayed state sequence")
    if len(messages) != code.k:
        msg = f"Expected {code.k} component messages, got {len(messages)}"
        raise ShapeError(msg)
    rng = rng_stream(code.seed, "input") if rng is None else rng
    x = np.zeros(code.n, dtype=np.intp)
    for s, (a, j) in enumerate(messages):
        n_a, per_bin, bins = code.sizes(s)
        if not (0 <= a < n_a and 0 <= j < bins):
            msg = f"Message (a={a}, j={j}) out of range for component {s}: a < {n_a}, j < {bins}"
            raise DomainError(msg)
        key = 0 if keys is None else int(keys[s])
        if not 0 <= key < bins:
            msg = f"Key {key} out of range for component {s} with {bins} bins"
            raise DomainError(msg)
        r = int(rng.integers(per_bin))
        word = code.codebooks[s][code.row(s, a, r, j ^ key)]
        pos = _positions(code, delayed, s)
        x[pos] = word[: pos.size]
    return x


def decode(
    code: MultiplexCode,
    y: np.ndarray,
    states: np.ndarray,
    delayed: np.ndarray,
    *,
    keys: Sequence[int] | None = None,
) -> DecodedBlock:
    """Exact MAP estimate of (a, j) per component, marginalizing the bin randomization."""
    states = _check_block(code, states, "State sequence")
    delayed = _check_block(code, delayed, "Delayed state sequence")
    y = np.asarray(y, dtype=np.intp)
    with np.errstate(divide="ignore"):
        log_main = np.log(code.ch.main())

    messages: list[tuple[int, int]] = []
    margins = np.empty(code.k)
    for s in range(code.k):
        n_a, per_bin, bins = code.sizes(s)
        pos = _positions(code, delayed, s)
        words = code.codebooks[s][:, : pos.size]
        loglik = log_main[states[pos], words, y[pos]].sum(axis=1)
        posterior = special.logsumexp(loglik.reshape(n_a, per_bin, bins), axis=1).ravel()
        best = int(np.argmax(posterior))
        if posterior.size > 1:
            top = np.partition(posterior, posterior.size - 2)[-2:]
            gap = top[1] - top[0]
            margins[s] = 0.0 if np.isnan(gap) else gap / LN2
        else:
            margins[s] = np.inf
        a, j = divmod(best, bins)
        key = 0 if keys is None else int(keys[s])
        messages.append((a, j ^ key))
    return DecodedBlock(messages=messages, margins=margins)


def _splitmix64(value: int) -> int:
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return value ^ (value >> 31)


def _color(y: np.ndarray, bits: int, seed: int, salt: int = 0) -> int:
    """Top ``bits`` bits of an avalanche hash of (seed, salt, length, symbols)."""
    if bits <= 0:
        return 0
    h = _splitmix64(seed & _MASK64)
    h = _splitmix64(h ^ salt)
    h = _splitmix64(h ^ len(y))
    for symbol in np.asarray(y, dtype=np.int64).tolist():
        h = _splitmix64(h ^ (symbol + 1))
    return h >> (64 - bits)


def key_bits_for(length: int, key_rate: float) -> int:
    """ceil(length * key_rate) key bits."""
    if key_rate < 0:
        msg = f"Key rate must be non-negative, got {key_rate}"
        raise DomainError(msg)
    return max(0, math.ceil(length * key_rate - RATE_TOL))


def generate_key(y: np.ndarray, key_rate: float, seed: int) -> int:
    """Color a received block into one of 2**ceil(len(y) * key_rate) cells."""
    return _color(y, key_bits_for(len(y), key_rate), seed)


@dataclass(frozen=True, eq=False)
class KeyMap:
    """Per-component feedback key: hash of the component's received symbols.

    Key bits are capped at the component's bin bits so the XOR stays inside
    the bin alphabet.
    """

    key_rates: np.ndarray
    key_bits: np.ndarray
    seed: int

    @classmethod
    def for_code(cls, code: MultiplexCode, key_rates: Sequence[float], seed: int) -> KeyMap:
        """Key sizes from rates R_f(s~) on the component lengths of ``code``."""
        rates = np.asarray(key_rates if len(key_rates) else [0.0], dtype=float)
        if rates.size == 1:
            rates = np.full(code.k, rates[0])
        if rates.size != code.k:
            msg = f"Expected one key rate per delayed state ({code.k}), got {rates.size}"
            raise ShapeError(msg)
        wanted = np.array([key_bits_for(int(n), float(r)) for n, r in zip(code.lengths, rates, strict=True)])
        bits = np.minimum(wanted, code.j_bits)
        if np.any(bits < wanted):
            logger.warning("Key bits %s capped at the bin bits %s", wanted.tolist(), code.j_bits.tolist())
        return cls(key_rates=rates, key_bits=bits.astype(np.intp), seed=seed)

    def key(self, s: int, y: np.ndarray) -> int:
        """Key for component s from its received symbols of an earlier block."""
        return _color(y, int(self.key_bits[s]), self.seed, salt=s)

    def rate(self, n: int) -> float:
        """Key bits per channel use."""
        return float(self.key_bits.sum()) / n


def _component_equivocation(code: MultiplexCode, s: int, states: tuple[int, ...], key_bits: int) -> float:
    """H(A, J | Z^L) in bits for one component seen through the given states."""
    n_a, per_bin, bins = code.sizes(s)
    message_bits = float(code.a_bits[s] + code.j_bits[s])
    if message_bits == 0:
        return 0.0
    if not states:
        return message_bits
    eaves = code.ch.eavesdropper()
    words = code.codebooks[s][:, : len(states)]
    rows = words.shape[0]
    likelihood = np.ones((rows, 1))
    for i, state in enumerate(states):
        likelihood = (likelihood[:, :, None] * eaves[state][words[:, i]][:, None, :]).reshape(rows, -1)
    pz = likelihood.reshape(n_a, per_bin, bins, -1).mean(axis=1)
    if key_bits:
        j = np.arange(bins)
        pz = np.mean([pz[:, j ^ key, :] for key in range(1 << key_bits)], axis=0)
    joint = pz / (n_a * bins)
    h = float(entropy_bits(joint.ravel()) - entropy_bits(joint.sum(axis=(0, 1))))
    return min(max(h, 0.0), message_bits)


def exact_equivocation(
    code: MultiplexCode,
    ch: DiscreteWiretapChannel,
    chain: StateChain,
    d: int,
    *,
    key_map: KeyMap | None = None,
    threads: int | None = 1,
) -> float:
    """H(W | Z^N, S^N) / N by enumerating every state path of one block.

    Given the state path the components see disjoint positions and
    independent codebooks, so the equivocation splits into a sum of
    per-component terms. With ``key_map`` the key is uniform over its
    alphabet and unknown to the eavesdropper.
    """
    if ch.table.shape != code.ch.table.shape:
        msg = f"Channel shape {ch.table.shape} differs from the one the code was built for {code.ch.table.shape}"
        raise ShapeError(msg)
    if chain.k != code.k:
        msg = f"Axis s mismatch: code has {code.k} components, chain has {chain.k} states"
        raise ShapeError(msg)
    n = code.n
    pairs = (ch.nz * chain.k) ** n
    widest = max(code.codebooks[s].shape[0] * ch.nz ** int(code.lengths[s]) for s in range(code.k))
    if max(pairs, widest) > MAX_ENUMERATION:
        msg = (
            f"Exact enumeration needs {pairs:.3e} (z-block, state-path) pairs and {widest:.3e} "
            f"likelihood cells (about {8 * max(pairs, widest) / 2**20:.0f} MiB), above 2^24"
        )
        raise GuardrailError(msg)
    if code.message_rate == 0:
        return 0.0
    if ch is not code.ch:
        code = replace(code, ch=ch)

    paths = np.array(list(itertools.product(range(chain.k), repeat=n)), dtype=np.intp)
    probs = chain.pi[paths[:, 0]] * np.prod(chain.K[paths[:, :-1], paths[:, 1:]], axis=1)
    delayed = delayed_states(paths, d)

    groups: dict[tuple[int, tuple[int, ...]], list[int]] = {}
    for p in range(paths.shape[0]):
        for s in range(code.k):
            pos = _positions(code, delayed[p], s)
            groups.setdefault((s, tuple(paths[p, pos].tolist())), []).append(p)

    key_bits = np.zeros(code.k, dtype=np.intp) if key_map is None else key_map.key_bits
    keys = list(groups)
    values = ordered_map(
        lambda item: _component_equivocation(code, item[0], item[1], int(key_bits[item[0]])),
        keys,
        threads,
    )
    per_path = np.zeros(paths.shape[0])
    for key, value in zip(keys, values, strict=True):
        per_path[groups[key]] += value
    result = float(probs @ per_path) / n
    logger.debug("Exact equivocation over %d paths and %d component terms: %.6f", paths.shape[0], len(keys), result)
    return result


def analytic_secrecy_rate(code: MultiplexCode, chain: StateChain) -> float:
    """sum pi(s~) K^d(s~,s) [I(X;Y|s) - I(X;Z|s)] at the code's input law."""
    weights = chain.pi[:, None] * power(chain, code.d)
    return float(np.sum(weights * discrete_state_terms(code.ch, code.input_law, feedback=False)))


def run_blocks(
    code: MultiplexCode,
    chain: StateChain,
    blocks: int,
    *,
    key_map: KeyMap | None = None,
    threads: int | None = 1,
) -> RunReport:
    """Send ``blocks`` independent blocks through the channel and decode them.

    With a key map, block b (0-based) is keyed once b >= max(2d, lag) with
    lag = max(d, 1); its key comes from the receiver's output of block b - lag.
    """
    if blocks < 1:
        msg = f"Need at least one block, got {blocks}"
        raise DomainError(msg)
    ch, d, n = code.ch, code.d, code.n
    state_rng = rng_stream(code.seed, "state")
    message_rng = rng_stream(code.seed, "message")
    input_rng = rng_stream(code.seed, "input")
    channel_rng = rng_stream(code.seed, "channel")

    lag = max(d, 1)
    first_keyed = max(2 * d, lag)
    history: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=lag)
    errors = 0
    keyed_blocks = 0
    for b in range(blocks):
        states = sample_path(chain, n, state_rng)
        delayed = delayed_states(states, d)
        messages = []
        for s in range(code.k):
            n_a, _, bins = code.sizes(s)
            messages.append((int(message_rng.integers(n_a)), int(message_rng.integers(bins))))
        keys = None
        if key_map is not None and b >= first_keyed:
            old_y, old_delayed = history[0]
            keys = [key_map.key(s, old_y[_positions(code, old_delayed, s)]) for s in range(code.k)]
            keyed_blocks += 1
        x = encode(code, messages, delayed, keys=keys, rng=input_rng)
        y, _ = sample_outputs(ch, states, x, channel_rng)
        decoded = decode(code, y, states, delayed, keys=keys)
        errors += decoded.messages != messages
        history.append((y, delayed))

    unkeyed = exact_equivocation(code, ch, chain, d, threads=threads)
    equivocation = unkeyed
    key_rate = 0.0
    if key_map is not None:
        key_rate = key_map.rate(n)
        if keyed_blocks:
            equivocation = exact_equivocation(code, ch, chain, d, key_map=key_map, threads=threads)
        bound = key_rate_bound(assemble_joint(chain, d, AuxiliaryScheme.direct(code.input_law), ch))
        if key_rate > bound + RATE_TOL:
            logger.warning("Feedback key rate %.4f exceeds the key-rate bound %.4f", key_rate, bound)

    report = RunReport(
        error_rate=errors / blocks,
        equivocation=equivocation,
        unkeyed_equivocation=unkeyed,
        analytic_target=analytic_secrecy_rate(code, chain),
        message_rate=code.message_rate,
        blocks=blocks,
        feedback=key_map is not None,
        key_rate=key_rate,
        keyed_blocks=keyed_blocks,
    )
    logger.info(
        "Codec run: %d blocks, error rate %.4f, equivocation %.6f of %.6f message bits per use",
        blocks,
        report.error_rate,
        report.equivocation,
        report.message_rate,
    )
    return report


def golden_block(code: MultiplexCode, chain: StateChain) -> np.ndarray:
    """Channel input of the first block of a run, drawn from the code's seeded streams.

    Matches block 0 of ``run_blocks``, which is never keyed.
    """
    states = sample_path(chain, code.n, rng_stream(code.seed, "state"))
    message_rng = rng_stream(code.seed, "message")
    messages = []
    for s in range(code.k):
        n_a, _, bins = code.sizes(s)
        messages.append((int(message_rng.integers(n_a)), int(message_rng.integers(bins))))
    return encode(code, messages, delayed_states(states, code.d), rng=rng_stream(code.seed, "input"))


def code_from_config(config: ExperimentConfig) -> tuple[MultiplexCode, StateChain]:
    """Build the code described by ``config.codec`` together with its state chain."""
    chain = config.chain.build()
    settings = config.codec
    code = build_code(
        config.channel.discrete(config.base_dir),
        chain,
        config.d,
        settings.rates,
        settings.n,
        config.seed,
        binning_rates=settings.binning_rates,
        bin_message_rates=settings.bin_message_rates,
        input_law=None if settings.input_law is None else np.asarray(settings.input_law),
    )
    return code, chain


def run_experiment(config: ExperimentConfig, threads: int | None = 1) -> RunReport:
    """Build the code described by ``config.codec`` and run it end to end."""
    code, chain = code_from_config(config)
    settings = config.codec
    key_map = KeyMap.for_code(code, settings.key_rates, config.seed) if settings.feedback else None
    return run_blocks(code, chain, settings.blocks, key_map=key_map, threads=threads)
