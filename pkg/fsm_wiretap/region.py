"""Capacity-equivocation bounds at given auxiliaries and degraded region boundaries."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from fsm_wiretap.capacity import (
    cond_entropy_y_given_z,
    discrete_state_terms,
    main_rate_terms,
    maximize_on_simplex,
    simplex_grid,
)
from fsm_wiretap.data_models import RateCaps, RatePair, RegionBoundary
from fsm_wiretap.exceptions import DegradednessError, FactorizationError, ShapeError
from fsm_wiretap.infotheory import JOINT_AXES, SD, U, V, X, Y, Z, JointTable, cond_entropy, cond_mutual_info
from fsm_wiretap.infotheory import S as S_AXIS
from fsm_wiretap.markov import power
from fsm_wiretap.workers import ordered_map

if TYPE_CHECKING:
    from collections.abc import Sequence

    from fsm_wiretap.channels import DiscreteWiretapChannel
    from fsm_wiretap.markov import StateChain

logger = logging.getLogger(__name__)

FACTORIZATION_TOL = 1e-9
DEFAULT_POINTS = 64
MULTIPLIER_ITERATIONS = 200
MULTIPLIER_CEILING = 1e6
REGION_RESOLUTION = 20_000
CORNER_ITERATIONS = 100
CORNER_TOL = 1e-12

STATES = [S_AXIS, SD]

# Markov chains implied by the inner-bound product form, checked in this order.
_INNER_CHAINS = (
    ("(U,V) -> S~ -> S", [U, V], [S_AXIS], [SD]),
    ("X -> (U,V,S~) -> S", [X], [S_AXIS], [U, V, SD]),
    ("(U,V,S~) -> (X,S) -> (Y,Z)", [U, V, SD], [Y, Z], [X, S_AXIS]),
)


def _require_axes(joint: JointTable) -> None:
    missing = [a for a in JOINT_AXES if a not in joint.axes]
    if missing:
        msg = f"Joint table is missing axes {missing}"
        raise ShapeError(msg)


def factorization_residual(joint: JointTable) -> float:
    """Max-abs gap between joint and pi_d(s~,s) P(u,v|s~) P(x|u,v,s~) P(y,z|x,s)."""
    _require_axes(joint)
    probs = joint.marginal(JOINT_AXES)
    pair = joint.marginal([SD, S_AXIS])
    uv = joint.conditional([U, V], [SD])
    x = joint.conditional([X], [U, V, SD])
    yz = joint.conditional([Y, Z], [X, S_AXIS])
    rebuilt = np.einsum("ab,auv,uvax,bxyz->uvabxyz", pair, uv, x, yz)
    return float(np.max(np.abs(rebuilt - probs)))


def check_inner_factorization(joint: JointTable, tol: float = FACTORIZATION_TOL) -> None:
    """Raise FactorizationError naming the first broken Markov chain."""
    residual = factorization_residual(joint)
    if residual <= tol:
        return
    for name, a, b, given in _INNER_CHAINS:
        if cond_mutual_info(joint, a, b, given) > tol:
            msg = f"Joint violates the Markov chain {name} (reconstruction residual {residual:.3e})"
            raise FactorizationError(msg)
    msg = f"Joint does not factor as the inner-bound product (residual {residual:.3e})"
    raise FactorizationError(msg)


def check_channel_law(joint: JointTable, ch: DiscreteWiretapChannel, tol: float = FACTORIZATION_TOL) -> None:
    """Raise when P(y,z|x,s) of the joint disagrees with the channel where P(x,s) > 0."""
    _require_axes(joint)
    law = joint.conditional([Y, Z], [X, S_AXIS])
    support = joint.marginal([X, S_AXIS]) > 0
    if law.shape != (ch.nx, ch.ns, ch.ny, ch.nz):
        msg = f"Joint alphabets {law.shape} do not match channel (x, s, y, z) = {(ch.nx, ch.ns, ch.ny, ch.nz)}"
        raise ShapeError(msg)
    gap = np.abs(law - ch.table.transpose(1, 0, 2, 3))[support]
    worst = float(gap.max()) if gap.size else 0.0
    if worst > tol:
        msg = f"Joint is inconsistent with the channel law P(y,z|x,s) (max deviation {worst:.3e})"
        raise FactorizationError(msg)


def _secrecy_caps(joint: JointTable) -> tuple[float, float]:
    r_cap = cond_mutual_info(joint, [V], [Y], STATES)
    gap = cond_mutual_info(joint, [V], [Y], [U, *STATES]) - cond_mutual_info(joint, [V], [Z], [U, *STATES])
    return r_cap, max(0.0, gap)


def eval_inner(joint: JointTable) -> RateCaps:
    """R <= I(V;Y|S,S~), Re <= [I(V;Y|U,S,S~) - I(V;Z|U,S,S~)]+ on a product-form joint."""
    check_inner_factorization(joint)
    r_cap, re_cap = _secrecy_caps(joint)
    return RateCaps(r_cap=r_cap, re_cap=re_cap)


def eval_outer(joint: JointTable, ch: DiscreteWiretapChannel | None = None) -> RateCaps:
    """Same expressions as eval_inner on any joint carrying the channel law."""
    _require_axes(joint)
    if ch is not None:
        check_channel_law(joint, ch)
    r_cap, re_cap = _secrecy_caps(joint)
    return RateCaps(r_cap=r_cap, re_cap=re_cap)


def eval_inner_feedback(joint: JointTable) -> RateCaps:
    """Inner bound with output feedback: Re adds the key term H(Y|V,Z,S,S~)."""
    check_inner_factorization(joint)
    r_cap, re_cap = _secrecy_caps(joint)
    return RateCaps(r_cap=r_cap, re_cap=re_cap + cond_entropy(joint, [Y], [V, Z, *STATES]))


def eval_outer_feedback(joint: JointTable, ch: DiscreteWiretapChannel | None = None) -> RateCaps:
    """Outer bound with output feedback: Re <= H(Y|Z,U,S,S~)."""
    _require_axes(joint)
    if ch is not None:
        check_channel_law(joint, ch)
    r_cap = cond_mutual_info(joint, [V], [Y], STATES)
    return RateCaps(r_cap=r_cap, re_cap=cond_entropy(joint, [Y], [Z, U, *STATES]))


class _RegionProblem:
    """Per-delayed-state (I_Y, Re-bound) values on a simplex grid.

    g(R) = max sum pi(s~) re(q_s~) subject to sum pi(s~) iy(q_s~) >= R is traced
    through the multiplier mu on the per-state objective re + mu * iy, with
    linear interpolation between the two grid vertices that bracket R.
    """

    def __init__(self, ch: DiscreteWiretapChannel, pi: np.ndarray, rows: np.ndarray, *, feedback: bool) -> None:
        self.pi = pi
        grid = simplex_grid(ch.nx, resolution=REGION_RESOLUTION)
        if feedback:
            bound = np.stack([cond_entropy_y_given_z(grid, ch.table[s]) for s in range(ch.ns)], axis=-1)
        else:
            bound = discrete_state_terms(ch, grid, feedback=False)
        self.iy = main_rate_terms(ch, grid) @ rows.T
        self.re = bound @ rows.T

    def totals(self, mu: float) -> tuple[float, float]:
        score = self.re + mu * self.iy
        best = score.max(axis=0, keepdims=True)
        # ties go to the larger Re
        tied = np.where(score >= best - 1e-15, self.re, -np.inf)
        choice = tied.argmax(axis=0)
        cols = np.arange(self.pi.size)
        return float(self.pi @ self.iy[choice, cols]), float(self.pi @ self.re[choice, cols])

    def max_rate(self) -> float:
        return float(self.pi @ self.iy.max(axis=0))

    def g(self, rate: float) -> float:
        iy_lo, re_lo = self.totals(0.0)
        if rate <= iy_lo:
            return re_lo
        lo, hi = 0.0, 1.0
        while self.totals(hi)[0] < rate and hi < MULTIPLIER_CEILING:
            hi *= 2.0
        iy_hi, re_hi = self.totals(hi)
        if iy_hi < rate:
            return float("nan")
        for _ in range(MULTIPLIER_ITERATIONS):
            mid = 0.5 * (lo + hi)
            iy_mid, re_mid = self.totals(mid)
            if iy_mid >= rate:
                hi, iy_hi, re_hi = mid, iy_mid, re_mid
            else:
                lo, iy_lo, re_lo = mid, iy_mid, re_mid
            if hi - lo < 1e-13:  # noqa: PLR2004
                break
        if iy_hi - iy_lo <= 0:
            return re_hi
        return re_lo + (rate - iy_lo) * (re_hi - re_lo) / (iy_hi - iy_lo)

    def corner(self) -> float:
        """Largest R with g(R) >= R, the secrecy capacity on this grid."""
        lo, hi = 0.0, self.max_rate()
        if self.g(hi) >= hi:
            return hi
        for _ in range(CORNER_ITERATIONS):
            mid = 0.5 * (lo + hi)
            # NaN marks an unreachable rate and compares False
            if self.g(mid) >= mid:
                lo = mid
            else:
                hi = mid
            if hi - lo < CORNER_TOL:
                break
        return lo


def max_main_rate(ch: DiscreteWiretapChannel, chain: StateChain, d: int) -> float:
    """max sum pi(s~) K^d(s~,s) I(X;Y|s,s~), the largest R in either degraded region."""
    pi, rows = chain.pi, power(chain, d)
    total = 0.0
    for i in range(pi.size):

        def objective(batch: np.ndarray, row: np.ndarray = rows[i]) -> np.ndarray:
            return main_rate_terms(ch, batch) @ row

        _, value = maximize_on_simplex(objective, ch.nx)
        total += pi[i] * value
    return float(total)


def trace_degraded_region(
    ch: DiscreteWiretapChannel,
    chain: StateChain,
    d: int,
    *,
    feedback: bool = False,
    n_points: int = DEFAULT_POINTS,
    rates: Sequence[float] | None = None,
    threads: int | None = 1,
) -> RegionBoundary:
    """Upper boundary of the degraded capacity-equivocation region.

    Without feedback Re <= I(X;Y|S,S~) - I(X;Z|S,S~); with feedback
    Re <= H(Y|Z,S,S~). Both need R <= I(X;Y|S,S~) and Re <= R. The corner R = Re,
    the largest R with g(R) >= R, is found by bisection on the region grid and
    always included; rates above the largest achievable R are dropped.
    """
    if ch.witness is None:
        msg = "Degraded region needs a degraded channel; no degradedness witness attached"
        raise DegradednessError(msg)
    problem = _RegionProblem(ch, chain.pi, power(chain, d), feedback=feedback)
    corner = problem.corner()

    r_max = max(max_main_rate(ch, chain, d), problem.max_rate())
    grid = np.linspace(0.0, r_max, n_points) if rates is None else np.asarray(rates, dtype=float)
    grid = np.unique(np.concatenate((grid[(grid >= 0) & (grid <= r_max)], [corner])))

    def point(rate: float) -> RatePair:
        bound = problem.g(rate)
        re = max(0.0, min(rate, bound)) if np.isfinite(bound) else float("nan")
        return RatePair(r=float(rate), re=float(re))

    points = [p for p in ordered_map(point, grid.tolist(), threads) if np.isfinite(p.re)]
    kind = "degraded-feedback" if feedback else "degraded"
    logger.info("Traced %s region boundary with %d points up to R=%.6f", kind, len(points), r_max)
    return RegionBoundary(points=points, kind=kind)
