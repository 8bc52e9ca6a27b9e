"""Secrecy capacities of degraded finite-state Markov wiretap channels.

Two families are covered:

* discrete degraded channels, maximized over one input law per delayed state;
* Gaussian and Gaussian-fading channels in closed form, maximized over one
  transmit power per delayed state under the average budget.

Both problems decouple per delayed state s~ once the budget multiplier is
fixed, because the objective is sum_s~ pi(s~) sum_s K^d(s~, s) term(s~, s).
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import TYPE_CHECKING

import numpy as np
from scipy import optimize, special

from fsm_wiretap.channels import FadingSpec, GaussianSpec
from fsm_wiretap.data_models import CapacityResult, InputLawFamily, PowerAllocation
from fsm_wiretap.exceptions import DegradednessError, DomainError, GuardrailError
from fsm_wiretap.infotheory import LN2, entropy_bits, mutual_info_bits
from fsm_wiretap.markov import power, stationary_rows
from fsm_wiretap.workers import ordered_map

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from fsm_wiretap.channels import DiscreteWiretapChannel
    from fsm_wiretap.markov import StateChain

    Term = Callable[[np.ndarray], np.ndarray]
    SimplexObjective = Callable[[np.ndarray], np.ndarray]

logger = logging.getLogger(__name__)

TWO_PI_E = 2.0 * math.pi * math.e
MAX_DISCRETE_INPUTS = 6
GRID_RESOLUTION = 200
MAX_GRID_POINTS = 200_000
FRANK_WOLFE_STEPS = 200
PAIR_SWEEPS = 50
LAMBDA_XTOL = 1e-9
POWER_XTOL = 1e-10
BUDGET_RTOL = 1e-7
CONCAVITY_TOL = 1e-12
CONCAVITY_GRID = 48
ASCENT_RESTARTS = 8
ASCENT_SWEEPS = 100


# -- closed-form per-state terms ------------------------------------------------------------


def _half_log2(x: np.ndarray | float) -> np.ndarray:
    return 0.5 * np.log2(x)


def gaussian_secrecy_term(p: np.ndarray | float, sigma2_s: float, sigma2_w: float) -> np.ndarray | float:
    """Secrecy rate of one state of the degraded Gaussian channel at power p, in bits."""
    p = np.asarray(p, dtype=float)
    value = _half_log2(1.0 + p / sigma2_s) - _half_log2(1.0 + p / (sigma2_s + sigma2_w))
    return value if value.ndim else float(value)


def _gaussian_feedback_raw(p: np.ndarray, sigma2_s: float, sigma2_w: float) -> np.ndarray:
    to_receiver = _half_log2(1.0 + p / sigma2_s)
    residual = _half_log2(TWO_PI_E * sigma2_w * (p + sigma2_s) / (p + sigma2_s + sigma2_w))
    return np.minimum(to_receiver, residual)


def gaussian_feedback_term(p: np.ndarray | float, sigma2_s: float, sigma2_w: float) -> np.ndarray | float:
    """min{I(X;Y|s), h(Y|Z,s)} with output feedback, floored at 0."""
    value = np.maximum(0.0, _gaussian_feedback_raw(np.asarray(p, dtype=float), sigma2_s, sigma2_w))
    return value if value.ndim else float(value)


def fading_secrecy_term(
    p: np.ndarray | float,
    g: float,
    l: float,  # noqa: E741
    sigma2_s: float,
    sigma2_w: float,
) -> np.ndarray | float:
    """Secrecy rate of one state of the fading channel Y = gX + N_s, Z = lY + N_w."""
    p = np.asarray(p, dtype=float)
    gain = g * g * p
    value = np.maximum(
        0.0,
        _half_log2(1.0 + gain / sigma2_s) - _half_log2(1.0 + gain * l * l / (l * l * sigma2_s + sigma2_w)),
    )
    return value if value.ndim else float(value)


def _fading_feedback_raw(
    p: np.ndarray,
    g: float,
    l: float,  # noqa: E741
    sigma2_s: float,
    sigma2_w: float,
) -> np.ndarray:
    gain = g * g * p
    to_receiver = _half_log2(1.0 + gain / sigma2_s)
    residual = _half_log2(TWO_PI_E * sigma2_w * (gain + sigma2_s) / (gain * l * l + l * l * sigma2_s + sigma2_w))
    return np.minimum(to_receiver, residual)


def fading_feedback_term(
    p: np.ndarray | float,
    g: float,
    l: float,  # noqa: E741
    sigma2_s: float,
    sigma2_w: float,
) -> np.ndarray | float:
    """Feedback counterpart of fading_secrecy_term, floored at 0."""
    value = np.maximum(0.0, _fading_feedback_raw(np.asarray(p, dtype=float), g, l, sigma2_s, sigma2_w))
    return value if value.ndim else float(value)


def state_terms(spec: GaussianSpec, *, feedback: bool) -> list[Term]:
    """Per-current-state rate functions of power for a Gaussian or fading spec."""
    terms: list[Term] = []
    for s in range(spec.ns):
        s2 = spec.sigma2[s]
        if isinstance(spec, FadingSpec):
            g, l = spec.gain_main(s), spec.gain_wiretap(s)  # noqa: E741
            fn = fading_feedback_term if feedback else fading_secrecy_term
            terms.append(lambda p, fn=fn, g=g, l=l, s2=s2: np.asarray(fn(p, g, l, s2, spec.sigma2_w)))
        else:
            fn = gaussian_feedback_term if feedback else gaussian_secrecy_term
            terms.append(lambda p, fn=fn, s2=s2: np.asarray(fn(p, s2, spec.sigma2_w)))
    return terms


def _feedback_clamped(spec: GaussianSpec, powers: np.ndarray) -> bool:
    """True when some min{.,.} term was negative before the 0-floor."""
    for s in range(spec.ns):
        if isinstance(spec, FadingSpec):
            raw = _fading_feedback_raw(powers, spec.gain_main(s), spec.gain_wiretap(s), spec.sigma2[s], spec.sigma2_w)
        else:
            raw = _gaussian_feedback_raw(powers, spec.sigma2[s], spec.sigma2_w)
        if np.any(raw < 0):
            return True
    return False


# -- power allocation -----------------------------------------------------------------------


def _aggregate(terms: Sequence[Term], row: np.ndarray) -> Callable[[np.ndarray | float], np.ndarray]:
    """F_s~(p) = sum_s K^d(s~, s) term_s(p)."""

    def objective(p: np.ndarray | float) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        total = np.zeros_like(p)
        for weight, term in zip(row, terms, strict=True):
            if weight > 0:
                total = total + weight * term(p)
        return total

    return objective


def _is_concave(objective: Callable[[np.ndarray], np.ndarray], p_max: float) -> bool:
    """Midpoint test on a log-spaced grid over [0, p_max]."""
    if p_max <= 0:
        return True
    grid = np.concatenate(([0.0], p_max * np.logspace(-6, 0, CONCAVITY_GRID)))
    left, right = grid[:-1], grid[1:]
    mid = 0.5 * (left + right)
    values = objective(np.concatenate((left, right, mid)))
    f_left, f_right, f_mid = np.split(values, 3)
    # wider triples catch kinks between grid points
    wide = objective(np.concatenate((grid[:-2], grid[2:], 0.5 * (grid[:-2] + grid[2:]))))
    w_left, w_right, w_mid = np.split(wide, 3)
    return bool(
        np.all(f_mid >= 0.5 * (f_left + f_right) - CONCAVITY_TOL)
        and np.all(w_mid >= 0.5 * (w_left + w_right) - CONCAVITY_TOL),
    )


def _best_response(objective: Callable[[np.ndarray], np.ndarray], lam: float, p_max: float, xatol: float) -> float:
    """argmax_p F(p) - lam * p over [0, p_max]."""
    if p_max <= 0:
        return 0.0
    res = optimize.minimize_scalar(
        lambda p: -(float(objective(p)) - lam * p),
        bounds=(0.0, p_max),
        method="bounded",
        options={"xatol": xatol},
    )
    candidates = [0.0, float(res.x), p_max]
    scores = [float(objective(p)) - lam * p for p in candidates]
    return candidates[int(np.argmax(scores))]


def _allocation_value(objectives: Sequence[Callable], pi: np.ndarray, p: np.ndarray) -> float:
    return float(sum(pi[i] * float(objectives[i](p[i])) for i in range(len(pi))))


def _coordinate_ascent(
    objectives: Sequence[Callable],
    pi: np.ndarray,
    p0: float,
    seed: int = 0,
) -> np.ndarray:
    """Pairwise power transfers on the budget face, restarted from random splits."""
    k = pi.size
    rng = np.random.default_rng(seed)
    starts = [np.full(k, p0)]
    starts += [w / pi * p0 for w in rng.dirichlet(np.ones(k), size=ASCENT_RESTARTS)]
    best_p, best_value = starts[0], -np.inf
    for start in starts:
        p = np.array(start, dtype=float)
        value = _allocation_value(objectives, pi, p)
        for _ in range(ASCENT_SWEEPS):
            previous = value
            for i, j in itertools.permutations(range(k), 2):
                # move t units from j to i while keeping pi @ p fixed
                hi = p[j] * pi[j] / pi[i]

                def moved(t: float, i: int = i, j: int = j) -> float:
                    q = p.copy()
                    q[i] += t
                    q[j] = max(q[j] - t * pi[i] / pi[j], 0.0)
                    return -_allocation_value(objectives, pi, q)

                if hi <= 0:
                    continue
                res = optimize.minimize_scalar(moved, bounds=(0.0, hi), method="bounded")
                if -res.fun > value:
                    p[i] += res.x
                    p[j] = max(p[j] - res.x * pi[i] / pi[j], 0.0)
                    value = -res.fun
            if value - previous < CONCAVITY_TOL:
                break
        if value > best_value:
            best_p, best_value = p, value
    return best_p


def optimize_power(terms: Sequence[Term], chain: StateChain, d: int, p0: float) -> PowerAllocation:
    """Maximize sum_s~ pi(s~) F_s~(P(s~)) subject to sum_s~ pi(s~) P(s~) <= p0.

    ``terms[s]`` maps a power to the rate in current state s. The budget
    multiplier lam is bisected; for each lam every delayed state solves its own
    one-dimensional concave problem. If any aggregate objective fails the
    concavity screen the allocation comes from projected coordinate ascent and is
    flagged.
    """
    if p0 < 0:
        msg = f"Power budget must be non-negative, got {p0}"
        raise DomainError(msg)
    if len(terms) != chain.k:
        msg = f"Expected {chain.k} per-state terms, got {len(terms)}"
        raise DomainError(msg)
    pi = chain.pi
    rows = power(chain, d)
    return _optimize_power_rows(terms, pi, rows, p0)


def _optimize_power_rows(terms: Sequence[Term], pi: np.ndarray, rows: np.ndarray, p0: float) -> PowerAllocation:
    k = pi.size
    if p0 == 0:
        return PowerAllocation(p=np.zeros(k), lam=0.0, value=0.0)

    objectives = [_aggregate(terms, rows[i]) for i in range(k)]
    p_max = p0 / pi
    xatol = POWER_XTOL * max(p0, 1.0)

    if not all(_is_concave(objectives[i], p_max[i]) for i in range(k)):
        logger.warning("Per-state objective failed the concavity screen; falling back to coordinate ascent")
        p = _coordinate_ascent(objectives, pi, p0)
        return PowerAllocation(p=p, lam=float("nan"), value=_allocation_value(objectives, pi, p), flagged=True)

    def respond(lam: float) -> np.ndarray:
        return np.array([_best_response(objectives[i], lam, p_max[i], xatol) for i in range(k)])

    def excess(lam: float) -> float:
        return float(pi @ respond(lam)) - p0

    if excess(0.0) <= BUDGET_RTOL * p0:
        p = respond(0.0)
        used = float(pi @ p)
        if used > p0:
            p *= p0 / used
        return PowerAllocation(p=p, lam=0.0, value=_allocation_value(objectives, pi, p))

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e12:  # noqa: PLR2004
            msg = "Budget multiplier did not bracket; objectives are unbounded in power"
            raise DomainError(msg)
    lam = optimize.bisect(excess, 0.0, hi, xtol=LAMBDA_XTOL)

    lam_hi, step = lam + LAMBDA_XTOL, LAMBDA_XTOL
    while excess(lam_hi) > 0:
        step *= 2.0
        lam_hi += step
    lam_lo = max(lam - LAMBDA_XTOL, 0.0)
    p_hi, p_lo = respond(lam_hi), respond(lam_lo)
    used_hi, used_lo = float(pi @ p_hi), float(pi @ p_lo)
    # blend the two sides of the multiplier so the budget binds
    if used_lo <= p0:
        p = p_lo
    elif used_lo > used_hi:
        theta = (p0 - used_hi) / (used_lo - used_hi)
        p = p_hi + theta * (p_lo - p_hi)
    else:
        p = p_hi
    used = float(pi @ p)
    if used > p0:
        p *= p0 / used
    return PowerAllocation(p=p, lam=float(lam), value=_allocation_value(objectives, pi, p))


# -- Gaussian and fading capacities ---------------------------------------------------------


def _kind(spec: GaussianSpec, *, feedback: bool) -> str:
    base = "fading" if isinstance(spec, FadingSpec) else "gaussian"
    return f"{base}-feedback" if feedback else base


def _check_states(spec: GaussianSpec, chain: StateChain) -> None:
    if spec.ns != chain.k:
        msg = f"Channel spec has {spec.ns} states, chain has {chain.k}"
        raise DomainError(msg)


def _gaussian_result(
    spec: GaussianSpec,
    pi: np.ndarray,
    rows: np.ndarray,
    d: int,
    *,
    feedback: bool,
    allocation: PowerAllocation | None = None,
) -> CapacityResult:
    terms = state_terms(spec, feedback=feedback)
    if allocation is None:
        allocation = _optimize_power_rows(terms, pi, rows, spec.p0)
    per_state = np.array([[float(terms[s](allocation.p[i])) for s in range(pi.size)] for i in range(pi.size)])
    weights = pi[:, None] * rows
    value = float(np.sum(weights * per_state))
    clamped = feedback and _feedback_clamped(spec, allocation.p)
    return CapacityResult(
        value=max(value, 0.0),
        argmax=allocation,
        per_state_terms=per_state,
        weights=weights,
        d=d,
        kind=_kind(spec, feedback=feedback),
        feedback=feedback,
        flagged=allocation.flagged,
        clamped=clamped,
    )


def gaussian_capacity(spec: GaussianSpec, chain: StateChain, d: int, *, feedback: bool = False) -> CapacityResult:
    """Secrecy capacity of the (fading) Gaussian FSM wiretap channel with state delay d."""
    _check_states(spec, chain)
    result = _gaussian_result(spec, chain.pi, power(chain, d), d, feedback=feedback)
    logger.info("Computed %s secrecy capacity %.6f bits at d=%d", result.kind, result.value, d)
    return result


def capacity_at_allocation(
    spec: GaussianSpec,
    chain: StateChain,
    d: int,
    allocation: PowerAllocation,
    *,
    feedback: bool = False,
) -> CapacityResult:
    """Secrecy rate achieved at delay d by a fixed power allocation."""
    _check_states(spec, chain)
    return _gaussian_result(spec, chain.pi, power(chain, d), d, feedback=feedback, allocation=allocation)


def asymptotic_capacity(spec: GaussianSpec, chain: StateChain, *, feedback: bool = False) -> CapacityResult:
    """Limit of the capacity as the delay grows: K^d replaced by stationary rows."""
    _check_states(spec, chain)
    return _gaussian_result(spec, chain.pi, stationary_rows(chain), -1, feedback=feedback)


def delay_loss(spec: GaussianSpec, chain: StateChain, d: int, *, feedback: bool = False) -> float:
    """Capacity lost by learning the state d uses late instead of instantly."""
    instant = gaussian_capacity(spec, chain, 0, feedback=feedback).value
    return instant - gaussian_capacity(spec, chain, d, feedback=feedback).value


# -- discrete degraded capacities -----------------------------------------------------------


def simplex_grid(nx: int, resolution: int = GRID_RESOLUTION, max_points: int = MAX_GRID_POINTS) -> np.ndarray:
    """All distributions on nx points with coordinates in multiples of 1/r.

    r starts at ``resolution`` and shrinks until the grid has at most
    ``max_points`` rows.
    """
    r = resolution
    while r > 1 and math.comb(r + nx - 1, nx - 1) > max_points:
        r -= 1
    if nx == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(r + nx - 1), nx - 1)), dtype=int)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), r + nx - 1)])
    return (np.diff(edges, axis=1) - 1) / r


def _divergence_bits(rows: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """D(rows[x] || reference) for every x."""
    return special.rel_entr(rows, reference[None, :]).sum(axis=1) / LN2


def _pair_sweeps(objective: SimplexObjective, q: np.ndarray) -> np.ndarray:
    """Golden-section line searches moving mass between pairs of inputs."""
    q = np.array(q, dtype=float)
    nx = q.size
    value = float(objective(q[None, :])[0])
    for _ in range(PAIR_SWEEPS):
        previous = value
        for i, j in itertools.combinations(range(nx), 2):
            lo, hi = -q[i], q[j]
            if hi - lo <= 0:
                continue
            direction = np.zeros(nx)
            direction[i], direction[j] = 1.0, -1.0

            def along(t: float, direction: np.ndarray = direction) -> float:
                point = np.clip(q + t * direction, 0.0, None)
                return -float(objective((point / point.sum())[None, :])[0])

            res = optimize.minimize_scalar(along, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            if -res.fun > value:
                q = np.clip(q + res.x * direction, 0.0, None)
                q /= q.sum()
                value = -res.fun
        if value - previous < 1e-14:  # noqa: PLR2004
            break
    return q


def _frank_wolfe(
    objective: SimplexObjective,
    gradient: Callable[[np.ndarray], np.ndarray],
    q: np.ndarray,
) -> np.ndarray:
    q = np.array(q, dtype=float)
    value = float(objective(q[None, :])[0])
    for _ in range(FRANK_WOLFE_STEPS):
        grad = gradient(q)
        vertex = np.zeros_like(q)
        vertex[int(np.argmax(grad))] = 1.0
        if float(grad @ (vertex - q)) < 1e-12:  # noqa: PLR2004
            break
        res = optimize.minimize_scalar(
            lambda g, q=q, vertex=vertex: -float(objective((q + g * (vertex - q))[None, :])[0]),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun <= value:
            break
        q = q + res.x * (vertex - q)
        value = -res.fun
    return q


def maximize_on_simplex(
    objective: SimplexObjective,
    nx: int,
    gradient: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, float]:
    """Grid search, then Frank-Wolfe (when a gradient is given) and pairwise line searches.

    ``objective`` maps an (n, nx) batch of distributions to n values.
    """
    grid = simplex_grid(nx)
    values = objective(grid)
    best = int(np.argmax(values))
    q, grid_value = grid[best], float(values[best])
    if gradient is not None:
        q = _frank_wolfe(objective, gradient, q)
    q = _pair_sweeps(objective, q)
    value = float(objective(q[None, :])[0])
    if value < grid_value:
        return grid[best], grid_value
    return q, value


def _require_degraded(ch: DiscreteWiretapChannel) -> None:
    if ch.witness is None:
        msg = "Secrecy capacity formulas need a degraded channel (X,S) -> Y -> Z; no degradedness witness attached"
        raise DegradednessError(msg)
    if ch.nx > MAX_DISCRETE_INPUTS:
        msg = f"Input alphabet of size {ch.nx} exceeds the limit of {MAX_DISCRETE_INPUTS} for simplex search"
        raise GuardrailError(msg)


def cond_entropy_y_given_z(batch: np.ndarray, joint: np.ndarray) -> np.ndarray:
    """H(Y|Z) for input laws in batch through P(y,z|x) of shape (nx, ny, nz)."""
    nx, ny, nz = joint.shape
    pyz = batch @ joint.reshape(nx, ny * nz)
    pz = pyz.reshape(-1, ny, nz).sum(axis=1)
    return entropy_bits(pyz) - entropy_bits(pz)


def main_rate_terms(ch: DiscreteWiretapChannel, batch: np.ndarray) -> np.ndarray:
    """I(X;Y|s) for a batch of input laws, shape (n, ns)."""
    main = ch.main()
    return np.stack([mutual_info_bits(batch, main[s]) for s in range(ch.ns)], axis=-1)


def discrete_state_terms(
    ch: DiscreteWiretapChannel,
    batch: np.ndarray,
    *,
    feedback: bool,
) -> np.ndarray:
    """Per-current-state rates for a batch of input laws, shape (n, ns)."""
    main, eaves = ch.main(), ch.eavesdropper()
    columns = []
    for s in range(ch.ns):
        to_receiver = mutual_info_bits(batch, main[s])
        if feedback:
            columns.append(np.minimum(to_receiver, cond_entropy_y_given_z(batch, ch.table[s])))
        else:
            columns.append(to_receiver - mutual_info_bits(batch, eaves[s]))
    return np.stack(columns, axis=-1)


def _secrecy_gradient(ch: DiscreteWiretapChannel, row: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    main, eaves = ch.main(), ch.eavesdropper()

    def gradient(q: np.ndarray) -> np.ndarray:
        smooth = (1.0 - 1e-9) * q + 1e-9 / q.size
        grad = np.zeros(q.size)
        for s in range(ch.ns):
            if row[s] > 0:
                grad += row[s] * (
                    _divergence_bits(main[s], smooth @ main[s]) - _divergence_bits(eaves[s], smooth @ eaves[s])
                )
        return grad

    return gradient


def _discrete_capacity_rows(  # noqa: PLR0913
    ch: DiscreteWiretapChannel,
    pi: np.ndarray,
    rows: np.ndarray,
    d: int,
    *,
    feedback: bool,
    threads: int | None = 1,
) -> CapacityResult:
    def solve(row: np.ndarray) -> np.ndarray:
        def objective(batch: np.ndarray) -> np.ndarray:
            return discrete_state_terms(ch, batch, feedback=feedback) @ row

        gradient = None if feedback else _secrecy_gradient(ch, row)
        law, _ = maximize_on_simplex(objective, ch.nx, gradient)
        return law

    laws = np.array(ordered_map(solve, list(rows), threads=threads)).reshape(pi.size, ch.nx)
    per_state = discrete_state_terms(ch, laws, feedback=feedback)
    weights = pi[:, None] * rows
    value = float(np.sum(weights * per_state))
    return CapacityResult(
        value=max(value, 0.0),
        argmax=InputLawFamily(laws),
        per_state_terms=per_state,
        weights=weights,
        d=d,
        kind="discrete-feedback" if feedback else "discrete",
        feedback=feedback,
    )


def secrecy_capacity_discrete(
    ch: DiscreteWiretapChannel,
    chain: StateChain,
    d: int,
    *,
    threads: int | None = 1,
) -> CapacityResult:
    """max over P(x|s~) of sum pi(s~) K^d(s~,s) [I(X;Y|s,s~) - I(X;Z|s,s~)].

    Each delayed state's input law is solved independently, on up to ``threads`` threads.
    """
    _require_degraded(ch)
    result = _discrete_capacity_rows(ch, chain.pi, power(chain, d), d, feedback=False, threads=threads)
    logger.info("Computed discrete secrecy capacity %.6f bits at d=%d", result.value, d)
    return result


def secrecy_capacity_discrete_feedback(
    ch: DiscreteWiretapChannel,
    chain: StateChain,
    d: int,
    *,
    threads: int | None = 1,
) -> CapacityResult:
    """max over P(x|s~) of sum pi(s~) K^d(s~,s) min{I(X;Y|s,s~), H(Y|Z,s,s~)}."""
    _require_degraded(ch)
    result = _discrete_capacity_rows(ch, chain.pi, power(chain, d), d, feedback=True, threads=threads)
    logger.info("Computed discrete feedback secrecy capacity %.6f bits at d=%d", result.value, d)
    return result
