"""Data classes for user-facing result structures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class PowerAllocation:
    """Per-delayed-state transmit powers P(s~) under an average budget."""

    p: np.ndarray
    lam: float = 0.0
    value: float = 0.0
    flagged: bool = False

    def budget_used(self, pi: np.ndarray) -> float:
        """Average power sum_s~ pi(s~) P(s~)."""
        return float(np.dot(pi, self.p))


@dataclass(eq=False)
class InputLawFamily:
    """One input distribution P(x|s~) per delayed state, shape (k, nx)."""

    laws: np.ndarray

    @property
    def k(self) -> int:
        """Number of delayed states."""
        return self.laws.shape[0]

    @classmethod
    def uniform(cls, k: int, nx: int) -> InputLawFamily:
        """Uniform input on every delayed state."""
        return cls(np.full((k, nx), 1.0 / nx))


@dataclass(eq=False)
class CapacityResult:
    """Capacity value with its maximizer and per-(s~, s) contributions."""

    value: float
    argmax: PowerAllocation | InputLawFamily
    per_state_terms: np.ndarray
    weights: np.ndarray
    d: int
    kind: str
    feedback: bool = False
    flagged: bool = False
    clamped: bool = False

    def recomputed_value(self) -> float:
        """Weighted sum of per-state terms, pi(s~) K^d(s~, s) * term(s~, s)."""
        return float(np.sum(self.weights * self.per_state_terms))


@dataclass
class RatePair:
    """Rate R and equivocation rate Re in bits per channel use."""

    r: float
    re: float


@dataclass
class RateCaps:
    """Bounds on R and Re from one capacity-equivocation theorem at a fixed joint law."""

    r_cap: float
    re_cap: float

    def corner(self) -> RatePair:
        """Best operating point, with Re never above R."""
        return RatePair(r=self.r_cap, re=min(self.r_cap, self.re_cap))


@dataclass
class RegionBoundary:
    """Upper boundary of a capacity-equivocation region, ordered by R."""

    points: list[RatePair]
    kind: str


@dataclass
class RunReport:
    """Outcome of an end-to-end toy codec experiment."""

    error_rate: float
    equivocation: float
    unkeyed_equivocation: float
    analytic_target: float
    message_rate: float
    blocks: int
    feedback: bool = False
    key_rate: float = 0.0
    keyed_blocks: int = 0


@dataclass(eq=False)
class Trajectory:
    """Sampled state, delayed-state, input and output sequences.

    ``delayed`` holds s_{i-d}; the first d positions carry the sentinel value k.
    """

    states: np.ndarray
    delayed: np.ndarray
    inputs: np.ndarray
    y: np.ndarray
    z: np.ndarray
    seed: int
    d: int
    k: int

    @property
    def t(self) -> int:
        """Trajectory length."""
        return self.states.shape[0]


@dataclass
class SweepRecord:
    """One grid point of a capacity sweep."""

    index: int
    params: dict[str, float | int | bool]
    value: float | None
    error: str | None = None
    flagged: bool = False


@dataclass(eq=False)
class DecodedBlock:
    """MAP estimates (a, j) per component and their log-posterior margins in bits."""

    messages: list[tuple[int, int]]
    margins: np.ndarray


@dataclass
class EmpiricalEstimate:
    """Plug-in information estimate in bits with a batch-means standard error."""

    value: float
    stderr: float
    samples: int
    undersampled: list[tuple[int, int]]


@dataclass
class TransitionScreen:
    """Pooled chi-square test of P(s_i | s_{i-d}, x_i) against the d-step rows."""

    statistic: float
    dof: int
    p_value: float
    passed: bool
