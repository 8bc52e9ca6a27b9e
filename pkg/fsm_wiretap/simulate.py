"""Monte Carlo sampling of the state process and channel, plug-in estimators and capacity sweeps."""

from __future__ import annotations

import itertools
import logging
from dataclasses import replace
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import stats

from fsm_wiretap.capacity import gaussian_capacity
from fsm_wiretap.channels import sample_outputs
from fsm_wiretap.codec import rng_stream
from fsm_wiretap.data_models import EmpiricalEstimate, InputLawFamily, SweepRecord, TransitionScreen, Trajectory
from fsm_wiretap.exceptions import DomainError, FsmWiretapError, ShapeError
from fsm_wiretap.infotheory import SD, S, X, Y, JointTable, cond_mutual_info
from fsm_wiretap.markov import TwoStateParams, power, sample_path, two_state
from fsm_wiretap.workers import ordered_map

if TYPE_CHECKING:
    from collections.abc import Sequence

    from fsm_wiretap.channels import DiscreteWiretapChannel, GaussianSpec
    from fsm_wiretap.markov import StateChain

logger = logging.getLogger(__name__)

MIN_CELL_SAMPLES = 100
BATCHES = 20
SCREEN_ALPHA = 1e-3
QUANTITIES = ("y", "z")


def sample_trajectory(
    chain: StateChain,
    ch: DiscreteWiretapChannel,
    input_law: InputLawFamily | np.ndarray,
    d: int,
    t: int,
    seed: int,
) -> Trajectory:
    """Sample T uses of the channel with inputs drawn from P(x | s_{i-d}).

    The chain starts from pi. While the delayed state does not exist yet the
    transmitter uses the law of state 0, and ``delayed`` records the sentinel k.
    """
    if t < 1:
        msg = f"Trajectory length must be at least 1, got {t}"
        raise DomainError(msg)
    if d < 0:
        msg = f"Delay must be non-negative, got {d}"
        raise DomainError(msg)
    laws = input_law.laws if isinstance(input_law, InputLawFamily) else np.asarray(input_law, dtype=float)
    if laws.shape != (chain.k, ch.nx):
        msg = f"Input law has shape {laws.shape}, expected (delayed states, inputs) = {(chain.k, ch.nx)}"
        raise ShapeError(msg)
    if ch.ns != chain.k:
        msg = f"Axis s mismatch: channel has {ch.ns} states, chain has {chain.k}"
        raise ShapeError(msg)

    states = sample_path(chain, t, rng_stream(seed, "state"))
    delayed = np.full(t, chain.k, dtype=np.intp)
    if d < t:
        delayed[d:] = states[: t - d]
    rows = np.cumsum(laws, axis=1)[np.where(delayed == chain.k, 0, delayed)]
    draws = rng_stream(seed, "input").random(t)
    inputs = np.minimum((rows <= draws[:, None]).sum(axis=1), ch.nx - 1).astype(np.intp)
    y, z = sample_outputs(ch, states, inputs, rng_stream(seed, "channel"))
    return Trajectory(states=states, delayed=delayed, inputs=inputs, y=y, z=z, seed=seed, d=d, k=chain.k)


def _plugin_cmi(sd: np.ndarray, s: np.ndarray, x: np.ndarray, out: np.ndarray, shape: tuple[int, ...]) -> float:
    counts = np.zeros(shape)
    np.add.at(counts, (sd, s, x, out), 1.0)
    return cond_mutual_info(JointTable((SD, S, X, Y), counts / counts.sum()), [X], [Y], [S, SD])


def empirical_cmi(traj: Trajectory, which: str = "y") -> EmpiricalEstimate:
    """Plug-in I(X;Y|S,S~) (``which="y"``) or I(X;Z|S,S~) (``which="z"``).

    Positions without a delayed state are left out. The standard error comes
    from the spread of the estimate over contiguous batches.
    """
    if which not in QUANTITIES:
        msg = f"Unknown quantity {which!r}; expected one of {', '.join(QUANTITIES)}"
        raise DomainError(msg)
    keep = traj.delayed < traj.k
    sd, s, x = traj.delayed[keep], traj.states[keep], traj.inputs[keep]
    out = (traj.y if which == "y" else traj.z)[keep]
    if sd.size == 0:
        msg = "Trajectory has no positions with a delayed state"
        raise DomainError(msg)
    shape = (traj.k, traj.k, int(traj.inputs.max()) + 1, int(out.max()) + 1)

    cells = np.zeros((traj.k, traj.k), dtype=np.int64)
    np.add.at(cells, (sd, s), 1)
    sparse = np.nonzero((cells > 0) & (cells < MIN_CELL_SAMPLES))
    undersampled = [(int(a), int(b)) for a, b in zip(*sparse, strict=True)]
    if undersampled:
        logger.warning("Undersampled (s~, s) cells with fewer than %d samples: %s", MIN_CELL_SAMPLES, undersampled)

    value = _plugin_cmi(sd, s, x, out, shape)
    stderr = float("nan")
    if sd.size >= BATCHES * MIN_CELL_SAMPLES:
        edges = np.linspace(0, sd.size, BATCHES + 1).astype(np.intp)
        batch_values = [
            _plugin_cmi(sd[lo:hi], s[lo:hi], x[lo:hi], out[lo:hi], shape)
            for lo, hi in itertools.pairwise(edges)
        ]
        stderr = float(np.std(batch_values, ddof=1) / np.sqrt(BATCHES))
    return EmpiricalEstimate(value=value, stderr=stderr, samples=int(sd.size), undersampled=undersampled)


def empirical_transitions(traj: Trajectory) -> np.ndarray:
    """Row-normalized one-step transition counts; unvisited rows stay zero."""
    counts = np.zeros((traj.k, traj.k))
    np.add.at(counts, (traj.states[:-1], traj.states[1:]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def transition_screen(traj: Trajectory, chain: StateChain, alpha: float = SCREEN_ALPHA) -> TransitionScreen:
    """Chi-square screen that s_i given (s_{i-d}, x_i) follows the row K^d(s_{i-d}, .)."""
    rows = power(chain, traj.d)
    keep = traj.delayed < traj.k
    sd, s, x = traj.delayed[keep], traj.states[keep], traj.inputs[keep]
    statistic, dof = 0.0, 0
    for group in np.unique(np.stack([sd, x]), axis=1).T:
        mask = (sd == group[0]) & (x == group[1])
        observed = np.bincount(s[mask], minlength=traj.k).astype(float)
        support = rows[group[0]] > 0
        if np.any(observed[~support]):
            logger.warning("Transition outside the support of K^%d from state %d", traj.d, group[0])
            return TransitionScreen(statistic=float("inf"), dof=0, p_value=0.0, passed=False)
        if support.sum() < 2:  # noqa: PLR2004
            continue
        expected = mask.sum() * rows[group[0]][support]
        statistic += float(stats.chisquare(observed[support], expected).statistic)
        dof += int(support.sum()) - 1
    p_value = float(stats.chi2.sf(statistic, dof)) if dof else 1.0
    return TransitionScreen(statistic=statistic, dof=dof, p_value=p_value, passed=p_value >= alpha)


def sweep_grid(
    ds: Sequence[int],
    us: Sequence[float] = (),
    sigma2_ws: Sequence[float] = (),
    feedbacks: Sequence[bool] = (False,),
) -> list[dict[str, Any]]:
    """Grid points ordered feedback, sigma2_w, u, then d (fastest)."""
    points = []
    for feedback, w2, u, d in itertools.product(feedbacks, sigma2_ws or [None], us or [None], ds):
        point: dict[str, Any] = {"d": int(d), "feedback": bool(feedback)}
        if u is not None:
            point["u"] = float(u)
        if w2 is not None:
            point["sigma2_w"] = float(w2)
        points.append(point)
    return points


def sweep(
    spec: GaussianSpec,
    chain: StateChain,
    grid: Sequence[dict[str, Any]],
    *,
    threads: int | None = 1,
) -> list[SweepRecord]:
    """Capacity at every grid point, in grid order.

    A point's ``u`` rebuilds the two-state chain at the steady-state ratio of
    ``chain``; ``sigma2_w`` replaces the eavesdropper noise. Failing points
    are recorded with their error and the sweep continues.
    """
    ratio = TwoStateParams.from_chain(chain).c if any("u" in p for p in grid) else None

    def evaluate(item: tuple[int, dict[str, Any]]) -> SweepRecord:
        index, params = item
        try:
            point_chain = chain if "u" not in params else two_state(params["u"], ratio)
            point_spec = spec if "sigma2_w" not in params else replace(spec, sigma2_w=params["sigma2_w"])
            result = gaussian_capacity(point_spec, point_chain, params["d"], feedback=params["feedback"])
        except (FsmWiretapError, ValueError, ArithmeticError) as exc:
            logger.warning("Sweep point %d %s failed: %s", index, params, exc)
            return SweepRecord(index=index, params=dict(params), value=None, error=str(exc))
        return SweepRecord(index=index, params=dict(params), value=result.value, flagged=result.flagged)

    records = ordered_map(evaluate, list(enumerate(grid)), threads)
    failed = sum(r.error is not None for r in records)
    logger.info("Swept %d grid points (%d failed)", len(records), failed)
    return records
