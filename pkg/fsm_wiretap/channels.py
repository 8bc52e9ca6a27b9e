"""Wiretap channel models: discrete state-dependent tables, degraded constructions, Gaussian families."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from fsm_wiretap.exceptions import DomainError, ShapeError

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
DEFAULT_WITNESS_TOL = 1e-8
TABLE_AXES = ("s", "x", "y", "z")


def _check_stochastic(array: np.ndarray, n_axes: int, name: str) -> None:
    """Raise if the trailing n_axes of array do not form probability rows."""
    if np.any(array < 0):
        msg = f"{name} has negative entries"
        raise DomainError(msg)
    sums = array.sum(axis=tuple(range(array.ndim - n_axes, array.ndim)))
    worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if worst > ROW_SUM_TOL:
        msg = f"{name} rows do not sum to 1 (worst deviation {worst:.3e})"
        raise DomainError(msg)


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DegradedWitness:
    """Factorization P(y,z|x,s) = P(z|y[,s]) P(y|x,s).

    ``wiretap`` is (ny, nz) for a state-independent eavesdropper link or
    (ns, ny, nz) when the eavesdropper's degradation depends on the state.
    """

    main: np.ndarray
    wiretap: np.ndarray

    @property
    def state_dependent(self) -> bool:
        """True when the wiretap factor carries a state axis."""
        return self.wiretap.ndim == 3  # noqa: PLR2004

    def wiretap_for_state(self, s: int) -> np.ndarray:
        """P(z|y) used in state s."""
        return self.wiretap[s] if self.state_dependent else self.wiretap

    def compose(self) -> np.ndarray:
        """Rebuild the full ns x nx x ny x nz table."""
        if self.state_dependent:
            return np.einsum("sxy,syz->sxyz", self.main, self.wiretap)
        return np.einsum("sxy,yz->sxyz", self.main, self.wiretap)


@dataclass(frozen=True, eq=False)
class DiscreteWiretapChannel:
    """State-dependent broadcast channel P(y,z|x,s) with axis order (s, x, y, z)."""

    table: np.ndarray
    witness: DegradedWitness | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        """Validate shape and row-stochasticity."""
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 4:  # noqa: PLR2004
            msg = f"Channel table must have axes {TABLE_AXES}, got {table.ndim} dimensions"
            raise ShapeError(msg)
        _check_stochastic(table, 2, "Channel table")
        object.__setattr__(self, "table", _readonly(table))

    @property
    def ns(self) -> int:
        """Number of channel states."""
        return self.table.shape[0]

    @property
    def nx(self) -> int:
        """Input alphabet size."""
        return self.table.shape[1]

    @property
    def ny(self) -> int:
        """Legitimate output alphabet size."""
        return self.table.shape[2]

    @property
    def nz(self) -> int:
        """Eavesdropper output alphabet size."""
        return self.table.shape[3]

    def main(self) -> np.ndarray:
        """Marginal P(y|x,s)."""
        return self.table.sum(axis=3)

    def eavesdropper(self) -> np.ndarray:
        """Marginal P(z|x,s)."""
        return self.table.sum(axis=2)

    @property
    def is_degraded(self) -> bool:
        """Whether a degradedness witness is attached."""
        return self.witness is not None


@dataclass(frozen=True)
class GaussianSpec:
    """Y = X + N_s, Z = Y + N_w with per-state noise variances and a power budget."""

    sigma2: tuple[float, ...]
    sigma2_w: float
    p0: float

    def __post_init__(self) -> None:
        """Check positivity of variances and the budget."""
        object.__setattr__(self, "sigma2", tuple(float(v) for v in self.sigma2))
        if not self.sigma2 or any(v <= 0 for v in self.sigma2):
            msg = f"State noise variances must be positive, got {self.sigma2}"
            raise DomainError(msg)
        if self.sigma2_w <= 0:
            msg = f"Eavesdropper noise variance must be positive, got {self.sigma2_w}"
            raise DomainError(msg)
        if self.p0 < 0:
            msg = f"Power budget must be non-negative, got {self.p0}"
            raise DomainError(msg)

    @property
    def ns(self) -> int:
        """Number of channel states."""
        return len(self.sigma2)

    def gain_main(self, s: int) -> float:  # noqa: ARG002
        """Receiver amplitude gain g(s); unity without fading."""
        return 1.0

    def gain_wiretap(self, s: int) -> float:  # noqa: ARG002
        """Eavesdropper amplitude gain l(s); unity without fading."""
        return 1.0


@dataclass(frozen=True)
class FadingSpec(GaussianSpec):
    """Y = g(s) X + N_s, Z = l(s) Y + N_w."""

    gains_main: tuple[float, ...] = ()
    gains_wiretap: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Validate gains against the state count."""
        super().__post_init__()
        object.__setattr__(self, "gains_main", tuple(float(v) for v in self.gains_main))
        object.__setattr__(self, "gains_wiretap", tuple(float(v) for v in self.gains_wiretap))
        for name, gains in (("gains_main", self.gains_main), ("gains_wiretap", self.gains_wiretap)):
            if len(gains) != self.ns:
                msg = f"{name} has {len(gains)} entries for {self.ns} states"
                raise ShapeError(msg)
            if not all(np.isfinite(gains)):
                msg = f"{name} must be finite, got {gains}"
                raise DomainError(msg)
        if all(v == 0 for v in self.gains_main):
            msg = "At least one state needs a non-zero receiver gain"
            raise DomainError(msg)

    def gain_main(self, s: int) -> float:
        """Receiver amplitude gain g(s)."""
        return self.gains_main[s]

    def gain_wiretap(self, s: int) -> float:
        """Eavesdropper amplitude gain l(s)."""
        return self.gains_wiretap[s]


@dataclass(frozen=True, eq=False)
class QuantizationGrid:
    """Input points plus cell edges for the two outputs.

    Outer edges bound the grid nominally; probability mass beyond them is
    folded into the first and last cells.
    """

    x_points: np.ndarray
    y_edges: np.ndarray
    z_edges: np.ndarray

    def __post_init__(self) -> None:
        """Reject degenerate grids."""
        for name in ("x_points", "y_edges", "z_edges"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.ndim != 1 or not np.all(np.isfinite(values)):
                msg = f"{name} must be a finite 1-D array"
                raise DomainError(msg)
            object.__setattr__(self, name, _readonly(values))
        if self.x_points.size < 1:
            msg = "Quantization grid needs at least one input point"
            raise DomainError(msg)
        for name, edges in (("y_edges", self.y_edges), ("z_edges", self.z_edges)):
            if edges.size < 2 or np.any(np.diff(edges) <= 0):  # noqa: PLR2004
                msg = f"{name} must be strictly increasing with at least one cell"
                raise DomainError(msg)

    @classmethod
    def uniform(cls, x_points: np.ndarray, lo: float, hi: float, cells: int) -> QuantizationGrid:
        """Same uniform cell partition of [lo, hi] for Y and Z."""
        if cells < 1 or not hi > lo:
            msg = f"Degenerate output grid: {cells} cells over [{lo}, {hi}]"
            raise DomainError(msg)
        edges = np.linspace(lo, hi, cells + 1)
        return cls(np.asarray(x_points, dtype=float), edges, edges)


def bsc(p: float) -> np.ndarray:
    """Binary symmetric channel transition matrix."""
    if not 0 <= p <= 1:
        msg = f"Crossover probability {p} outside [0, 1]"
        raise DomainError(msg)
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


def degraded_from(main: np.ndarray, wiretap: np.ndarray) -> DiscreteWiretapChannel:
    """Compose P(y|x,s) with P(z|y) (or P(z|y,s)) into a degraded channel."""
    main = np.asarray(main, dtype=float)
    wiretap = np.asarray(wiretap, dtype=float)
    if main.ndim != 3:  # noqa: PLR2004
        msg = f"Main channel must have axes (s, x, y), got {main.ndim} dimensions"
        raise ShapeError(msg)
    if wiretap.ndim not in (2, 3):
        msg = f"Wiretap factor must have axes (y, z) or (s, y, z), got {wiretap.ndim} dimensions"
        raise ShapeError(msg)
    if wiretap.shape[-2] != main.shape[2]:
        msg = f"Axis y mismatch: main has {main.shape[2]} outputs, wiretap expects {wiretap.shape[-2]}"
        raise ShapeError(msg)
    if wiretap.ndim == 3 and wiretap.shape[0] != main.shape[0]:  # noqa: PLR2004
        msg = f"Axis s mismatch: main has {main.shape[0]} states, wiretap has {wiretap.shape[0]}"
        raise ShapeError(msg)
    _check_stochastic(main, 1, "Main channel")
    _check_stochastic(wiretap, 1, "Wiretap factor")

    witness = DegradedWitness(main=_readonly(main), wiretap=_readonly(wiretap))
    return DiscreteWiretapChannel(table=witness.compose(), witness=witness)


def _solve_wiretap_row(weights: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, float]:
    """Non-negative least squares for one y-row: targets[r, z] ~ weights[r] * w[z]."""
    nz = targets.shape[1]
    design = np.kron(weights[:, None], np.eye(nz))
    row, _ = optimize.nnls(design, targets.ravel())
    residual = float(np.max(np.abs(design @ row - targets.ravel())))
    total = row.sum()
    row = row / total if total > 0 else np.full(nz, 1.0 / nz)
    return row, residual


def check_degraded(
    ch: DiscreteWiretapChannel,
    tol: float = DEFAULT_WITNESS_TOL,
    *,
    state_dependent: bool = False,
) -> DegradedWitness | None:
    """Search for P(z|y) with (X,S) -> Y -> Z; return None when none fits within tol.

    With ``state_dependent`` the factor may vary with s (X -> (S,Y) -> Z), which is
    the structure of the fading model.
    """
    main = ch.main()
    groups = [np.arange(ch.ns)] if not state_dependent else [np.array([s]) for s in range(ch.ns)]
    factors = []
    worst = 0.0
    for states in groups:
        factor = np.empty((ch.ny, ch.nz))
        for y in range(ch.ny):
            weights = main[states, :, y].ravel()
            targets = ch.table[states, :, y, :].reshape(-1, ch.nz)
            factor[y], residual = _solve_wiretap_row(weights, targets)
            worst = max(worst, residual)
        factors.append(factor)

    if worst > tol:
        logger.debug("No degradedness witness: max residual %.3e > %.1e", worst, tol)
        return None
    wiretap = factors[0] if not state_dependent else np.stack(factors)
    witness = DegradedWitness(main=_readonly(main), wiretap=_readonly(wiretap))
    final = float(np.max(np.abs(witness.compose() - ch.table)))
    if final > tol:
        return None
    return witness


def with_witness(ch: DiscreteWiretapChannel, tol: float = DEFAULT_WITNESS_TOL) -> DiscreteWiretapChannel:
    """Attach a witness when the table is degraded (state-independent first)."""
    if ch.witness is not None:
        return ch
    witness = check_degraded(ch, tol) or check_degraded(ch, tol, state_dependent=True)
    return DiscreteWiretapChannel(table=ch.table, witness=witness)


def _cell_masses(edges: np.ndarray, means: np.ndarray, std: float) -> np.ndarray:
    """Gaussian mass of each cell for each mean, tails folded into the edge cells."""
    cdf = stats.norm.cdf((edges[None, :] - means[:, None]) / std)
    cdf[:, 0] = 0.0
    cdf[:, -1] = 1.0
    return np.diff(cdf, axis=1)


def gaussian_to_discrete(spec: GaussianSpec, grid: QuantizationGrid) -> DiscreteWiretapChannel:
    """Quantize the (fading) Gaussian wiretap channel onto a finite grid.

    P(y|x,s) integrates N(g(s) x, sigma_s^2) over each y-cell; the eavesdropper
    factor P(z|y,s) integrates N(l(s) y_mid, sigma_w^2) over each z-cell, using
    the y-cell midpoint. The result is degraded by construction.
    """
    y_mid = 0.5 * (grid.y_edges[:-1] + grid.y_edges[1:])
    main = np.stack(
        [
            _cell_masses(grid.y_edges, spec.gain_main(s) * grid.x_points, float(np.sqrt(spec.sigma2[s])))
            for s in range(spec.ns)
        ],
    )
    wiretap_gains = [spec.gain_wiretap(s) for s in range(spec.ns)]
    std_w = float(np.sqrt(spec.sigma2_w))
    if len(set(wiretap_gains)) == 1:
        wiretap = _cell_masses(grid.z_edges, wiretap_gains[0] * y_mid, std_w)
    else:
        wiretap = np.stack([_cell_masses(grid.z_edges, gain * y_mid, std_w) for gain in wiretap_gains])
    # renormalize away floating error so rows pass the 1e-12 check
    main /= main.sum(axis=-1, keepdims=True)
    wiretap /= wiretap.sum(axis=-1, keepdims=True)
    return degraded_from(main, wiretap)


def gaussian_input_law(x_points: np.ndarray, powers: np.ndarray | float) -> np.ndarray:
    """Discretized zero-mean Gaussian weights on x_points, one row per power."""
    x_points = np.asarray(x_points, dtype=float)
    powers = np.atleast_1d(np.asarray(powers, dtype=float))
    rows = []
    for p in powers:
        if p <= 0:
            row = (x_points == x_points[np.argmin(np.abs(x_points))]).astype(float)
        else:
            row = np.exp(-(x_points**2) / (2.0 * p))
        rows.append(row / row.sum())
    return np.vstack(rows)


def save_channel_json(ch: DiscreteWiretapChannel, path: Path) -> None:
    """Write the table as nested arrays with an axes header."""
    payload = {"axes": list(TABLE_AXES), "table": ch.table.tolist()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_channel_json(path: Path) -> DiscreteWiretapChannel:
    """Read a table written by save_channel_json, attaching a witness if degraded."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    axes = tuple(payload.get("axes", TABLE_AXES))
    if axes != TABLE_AXES:
        msg = f"Channel file {path} declares axes {axes}, expected {TABLE_AXES}"
        raise ShapeError(msg)
    return with_witness(DiscreteWiretapChannel(np.asarray(payload["table"], dtype=float)))


def load_matrix_json(path: Path) -> np.ndarray:
    """Read a bare nested-array JSON file (main or wiretap factor)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    data = payload["table"] if isinstance(payload, dict) else payload
    return np.asarray(data, dtype=float)


def sample_outputs(
    ch: DiscreteWiretapChannel,
    states: np.ndarray,
    inputs: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (y_i, z_i) from P(y,z|x_i,s_i) for every position."""
    states = np.asarray(states, dtype=np.intp)
    inputs = np.asarray(inputs, dtype=np.intp)
    if states.shape != inputs.shape:
        msg = f"State and input sequences differ in shape: {states.shape} vs {inputs.shape}"
        raise ShapeError(msg)
    cells = ch.ny * ch.nz
    cdf = np.cumsum(ch.table.reshape(ch.ns, ch.nx, cells), axis=-1)
    draws = rng.random(states.shape[0])
    picked = np.minimum((cdf[states, inputs] <= draws[:, None]).sum(axis=1), cells - 1)
    y, z = np.divmod(picked, ch.nz)
    return y.astype(np.intp), z.astype(np.intp)
