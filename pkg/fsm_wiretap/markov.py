"""Channel state process: transition matrix, stationary law and delayed-state pairing.

The state of the wiretap channel follows a stationary, irreducible, aperiodic
finite-state Markov chain. The transmitter sees the state with delay d, so most
quantities in this package are weighted by the joint law of the pair
(delayed state, current state), pi(s~) * K^d(s~, s).
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce

import numpy as np
from scipy import linalg
from scipy.sparse import csgraph

from fsm_wiretap.exceptions import ChainError, DomainError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10
MAX_EXACT_DELAY = 1_000_000


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _chain_period(support: np.ndarray) -> int:
    """Return the gcd of cycle lengths of a strongly connected support graph."""
    k = support.shape[0]
    level = np.full(k, -1, dtype=int)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.flatnonzero(support[i]):
                if level[j] < 0:
                    level[j] = level[i] + 1
                    nxt.append(int(j))
        frontier = nxt
    rows, cols = np.nonzero(support)
    return reduce(math.gcd, (int(level[i] + 1 - level[j]) for i, j in zip(rows, cols, strict=True)), 0)


@dataclass(frozen=True, eq=False)
class StationaryLaw:
    """Steady-state probabilities of the chain."""

    pi: np.ndarray


@dataclass(frozen=True, eq=False)
class DelayedJoint:
    """Joint law of (delayed state s~, current state s) for a delay d."""

    d: int
    table: np.ndarray


@dataclass(frozen=True, eq=False)
class StateChain:
    """Row-stochastic k x k transition matrix of an irreducible aperiodic chain.

    Validation runs at construction; instances are immutable afterwards.
    """

    K: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        """Validate stochasticity, irreducibility and aperiodicity."""
        K = np.asarray(self.K, dtype=float)  # noqa: N806
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:  # noqa: PLR2004
            msg = f"Transition matrix must be square with at least one state, got shape {K.shape}"
            raise ChainError(msg)
        if np.any(K < 0) or np.any(K > 1):
            msg = "Transition probabilities must lie in [0, 1]"
            raise ChainError(msg)
        row_sums = K.sum(axis=1)
        bad_rows = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL)
        if bad_rows.size:
            msg = f"Rows {bad_rows.tolist()} do not sum to 1 (sums {row_sums[bad_rows].tolist()})"
            raise ChainError(msg)

        support = K > 0
        n_comp, labels = csgraph.connected_components(support.astype(int), directed=True, connection="strong")
        if n_comp > 1:
            groups = [np.flatnonzero(labels == c).tolist() for c in range(n_comp)]
            msg = f"Chain is reducible: strongly connected classes {groups}"
            raise ChainError(msg)
        period = _chain_period(support)
        if period != 1:
            msg = f"Chain is periodic with period {period}"
            raise ChainError(msg)
        object.__setattr__(self, "K", _readonly(K))

    @property
    def k(self) -> int:
        """Number of states."""
        return self.K.shape[0]

    @cached_property
    def pi(self) -> np.ndarray:
        """Stationary distribution (cached)."""
        return stationary(self).pi

    @classmethod
    def from_matrix(cls, rows: list[list[float]] | np.ndarray) -> StateChain:
        """Build a chain from a row-major nested list."""
        return cls(np.asarray(rows, dtype=float))


@dataclass(frozen=True)
class TwoStateParams:
    """Good/bad chain parameters: b = P(B|G), g = P(G|B)."""

    b: float
    g: float

    def __post_init__(self) -> None:
        """Check that both switching probabilities lie in (0, 1]."""
        for name, value in (("b", self.b), ("g", self.g)):
            if not 0 < value <= 1:
                msg = f"Two-state parameter {name}={value} outside (0, 1]"
                raise DomainError(msg)

    @property
    def u(self) -> float:
        """Memory parameter 1 - g - b, the second eigenvalue of K."""
        return 1.0 - self.g - self.b

    @property
    def c(self) -> float:
        """Steady-state ratio g / b = pi(G) / pi(B)."""
        return self.g / self.b

    def chain(self) -> StateChain:
        """Transition matrix with state 0 = G and state 1 = B."""
        return StateChain(np.array([[1.0 - self.b, self.b], [self.g, 1.0 - self.g]]))

    @classmethod
    def from_chain(cls, chain: StateChain) -> TwoStateParams:
        """Recover (b, g) from a two-state chain."""
        if chain.k != 2:  # noqa: PLR2004
            msg = f"Expected a two-state chain, got {chain.k} states"
            raise DomainError(msg)
        return cls(b=float(chain.K[0, 1]), g=float(chain.K[1, 0]))


def stationary(chain: StateChain) -> StationaryLaw:
    """Solve pi K = pi, sum(pi) = 1 as a direct linear system."""
    k = chain.k
    system = np.vstack([np.eye(k) - chain.K.T, np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = linalg.lstsq(system, rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ chain.K - pi)))
    if residual > STATIONARY_TOL:
        msg = f"Stationary solve did not converge (residual {residual:.3e})"
        raise ChainError(msg)
    return StationaryLaw(_readonly(pi))


def stationary_rows(chain: StateChain) -> np.ndarray:
    """Limit of K^d as d grows: every row equals pi."""
    return _readonly(np.tile(chain.pi, (chain.k, 1)))


def power(chain: StateChain, d: int) -> np.ndarray:
    """d-step transition matrix K^d by binary exponentiation.

    Rows are renormalized after each multiply. Delays beyond MAX_EXACT_DELAY
    return the stationary rows.
    """
    if d < 0:
        msg = f"Delay must be non-negative, got {d}"
        raise DomainError(msg)
    if d > MAX_EXACT_DELAY:
        return stationary_rows(chain)

    result = np.eye(chain.k)
    base = np.array(chain.K)
    while d:
        if d & 1:
            result = result @ base
            result /= result.sum(axis=1, keepdims=True)
        d >>= 1
        if d:
            base = base @ base
            base /= base.sum(axis=1, keepdims=True)
    return _readonly(result)


def delayed_joint(chain: StateChain, d: int) -> DelayedJoint:
    """Joint law table(j, l) = pi(j) K^d(j, l) of (S~, S)."""
    table = chain.pi[:, None] * power(chain, d)
    return DelayedJoint(d=d, table=_readonly(table))


def two_state(u: float, c: float) -> StateChain:
    """Good/bad chain with memory u and steady-state ratio c = pi(G)/pi(B)."""
    if not -1 < u < 1:
        msg = f"Memory u={u} outside (-1, 1)"
        raise DomainError(msg)
    if c <= 0:
        msg = f"Steady-state ratio c={c} must be positive"
        raise DomainError(msg)
    g = c * (1.0 - u) / (1.0 + c)
    b = (1.0 - u) / (1.0 + c)
    return TwoStateParams(b=b, g=g).chain()


def two_state_from_gb(g: float, b: float) -> StateChain:
    """Good/bad chain from the switching probabilities directly."""
    return TwoStateParams(b=b, g=g).chain()


def memory(chain: StateChain) -> float:
    """Second-largest eigenvalue modulus; equals |u| for two-state chains."""
    if chain.k == 1:
        return 0.0
    eigvals = np.sort(np.abs(linalg.eigvals(chain.K)))[::-1]
    return float(eigvals[1])


def sample_path(chain: StateChain, n: int, rng: np.random.Generator) -> np.ndarray:
    """State path of length n started from pi, by inverse-CDF draws."""
    draws = rng.random(n)
    states = np.zeros(n, dtype=np.intp)
    if n == 0:
        return states
    start = np.cumsum(chain.pi).tolist()
    rows = [np.cumsum(row).tolist() for row in chain.K]
    last = chain.k - 1
    state = min(bisect.bisect_right(start, draws[0]), last)
    states[0] = state
    for i in range(1, n):
        state = min(bisect.bisect_right(rows[state], draws[i]), last)
        states[i] = state
    return states
