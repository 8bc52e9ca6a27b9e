"""Exact information measures on dense joint tables with named axes.

All quantities are returned in bits. Sums run in natural log through
``scipy.special.entr`` and are converted once at the end.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import special

from fsm_wiretap.exceptions import GuardrailError, ShapeError
from fsm_wiretap.markov import delayed_joint

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from fsm_wiretap.channels import DiscreteWiretapChannel
    from fsm_wiretap.markov import StateChain

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
MASS_TOL = 1e-12
ROW_SUM_TOL = 1e-12
MAX_TABLE_CELLS = 10**8
IDENTITY_TOL = 1e-9
MAX_CSISZAR_N = 3

# Axis names of assembled joints: auxiliaries, delayed state, state, input, outputs.
U, V, SD, S, X, Y, Z = "u", "v", "sd", "s", "x", "y", "z"
JOINT_AXES = (U, V, SD, S, X, Y, Z)


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense probability table over ordered, named axes."""

    axes: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        """Validate axis names against the table and the probability mass."""
        probs = np.asarray(self.probs, dtype=float)
        axes = tuple(self.axes)
        if len(set(axes)) != len(axes):
            msg = f"Duplicate axis names in {axes}"
            raise ShapeError(msg)
        if probs.ndim != len(axes):
            msg = f"Table has {probs.ndim} dimensions but {len(axes)} axis names {axes}"
            raise ShapeError(msg)
        if probs.size > MAX_TABLE_CELLS:
            msg = f"Joint table with {probs.size:.3e} cells exceeds the {MAX_TABLE_CELLS:.0e}-cell limit"
            raise GuardrailError(msg)
        if np.any(probs < 0):
            msg = "Joint table has negative entries"
            raise ShapeError(msg)
        total = float(probs.sum())
        if abs(total - 1.0) > MASS_TOL:
            msg = f"Joint table mass is {total!r}, expected 1"
            raise ShapeError(msg)
        probs.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "probs", probs)

    @property
    def sizes(self) -> dict[str, int]:
        """Axis name to alphabet size."""
        return dict(zip(self.axes, self.probs.shape, strict=True))

    def index(self, axis: str) -> int:
        """Position of a named axis."""
        try:
            return self.axes.index(axis)
        except ValueError:
            msg = f"Unknown axis {axis!r}; table has {self.axes}"
            raise ShapeError(msg) from None

    def marginal(self, axes: Sequence[str]) -> np.ndarray:
        """Marginal law over the given axes, in the given order."""
        positions = [self.index(a) for a in axes]
        dropped = tuple(i for i in range(len(self.axes)) if i not in positions)
        reduced = self.probs.sum(axis=dropped) if dropped else np.array(self.probs)
        kept = sorted(positions)
        return reduced.transpose([kept.index(i) for i in positions])

    def conditional(self, target: Sequence[str], given: Sequence[str]) -> np.ndarray:
        """P(target | given) with axes ordered given + target; 0/0 is 0."""
        joint = self.marginal([*given, *target])
        norm = joint.sum(axis=tuple(range(len(given), len(given) + len(target))), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(norm > 0, joint / np.where(norm > 0, norm, 1.0), 0.0)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready payload with axis metadata."""
        return {"axes": list(self.axes), "sizes": list(self.probs.shape), "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> JointTable:
        """Inverse of to_dict."""
        probs = np.asarray(payload["probs"], dtype=float)
        if list(probs.shape) != list(payload.get("sizes", probs.shape)):
            msg = f"Declared sizes {payload['sizes']} do not match table shape {probs.shape}"
            raise ShapeError(msg)
        return cls(tuple(payload["axes"]), probs)


@dataclass(frozen=True, eq=False)
class AuxiliaryScheme:
    """Factor laws P(u|s~), P(v|u,s~), P(x|u,v,s~).

    Shapes are (k, nu), (k, nu, nv) and (k, nu, nv, nx).
    """

    pu: np.ndarray
    pv: np.ndarray
    px: np.ndarray

    def __post_init__(self) -> None:
        """Check cardinalities and row sums."""
        pu, pv, px = (np.asarray(a, dtype=float) for a in (self.pu, self.pv, self.px))
        if pu.ndim != 2 or pv.ndim != 3 or px.ndim != 4:  # noqa: PLR2004
            msg = f"Auxiliary factors have shapes {pu.shape}, {pv.shape}, {px.shape}"
            raise ShapeError(msg)
        k, nu = pu.shape
        if pv.shape[:2] != (k, nu):
            msg = f"Axis u mismatch: P(v|u,s~) has shape {pv.shape}, expected ({k}, {nu}, ...)"
            raise ShapeError(msg)
        if px.shape[:3] != pv.shape:
            msg = f"Axis v mismatch: P(x|u,v,s~) has shape {px.shape}, expected {pv.shape} + (nx,)"
            raise ShapeError(msg)
        for name, factor in (("P(u|s~)", pu), ("P(v|u,s~)", pv), ("P(x|u,v,s~)", px)):
            if np.any(factor < 0) or np.max(np.abs(factor.sum(axis=-1) - 1.0)) > ROW_SUM_TOL:
                msg = f"{name} is not row-stochastic"
                raise ShapeError(msg)
        object.__setattr__(self, "pu", pu)
        object.__setattr__(self, "pv", pv)
        object.__setattr__(self, "px", px)

    @property
    def k(self) -> int:
        """Number of delayed states."""
        return self.pu.shape[0]

    @property
    def nx(self) -> int:
        """Input alphabet size."""
        return self.px.shape[3]

    @classmethod
    def deterministic(cls, input_law: np.ndarray) -> AuxiliaryScheme:
        """Singleton U and V with P(x|s~) given directly."""
        input_law = np.asarray(input_law, dtype=float)
        k, nx = input_law.shape
        return cls(np.ones((k, 1)), np.ones((k, 1, 1)), input_law.reshape(k, 1, 1, nx))

    @classmethod
    def direct(cls, input_law: np.ndarray) -> AuxiliaryScheme:
        """Singleton U with V = X, the choice that is optimal for degraded channels."""
        input_law = np.asarray(input_law, dtype=float)
        k, nx = input_law.shape
        px = np.broadcast_to(np.eye(nx), (k, 1, nx, nx)).copy()
        return cls(np.ones((k, 1)), input_law.reshape(k, 1, nx), px)


@dataclass(frozen=True)
class IdentityCheck:
    """Both sides of H(Y|S,S~,Z) = I(X;Y|S,S~) - I(X;Z|S,S~) + H(Y|X,Z,S,S~)."""

    lhs: float
    rhs: float
    markov_residual: float
    degraded: bool

    @property
    def residual(self) -> float:
        """Absolute gap between the two sides."""
        return abs(self.lhs - self.rhs)


@dataclass(frozen=True)
class SplitRateRegion:
    """Caps of the rate-split region before eliminating the common/private split."""

    common: float
    private: float
    equivocation: float


def _entropy_of(probs: np.ndarray) -> float:
    return float(special.entr(probs).sum()) / LN2


def _h(t: JointTable, axes: Iterable[str]) -> float:
    axes = list(dict.fromkeys(axes))
    if not axes:
        return 0.0
    return _entropy_of(t.marginal(axes))


def _check_disjoint(*groups: Sequence[str]) -> None:
    seen: set[str] = set()
    for group in groups:
        overlap = seen.intersection(group)
        if overlap:
            msg = f"Axis sets overlap on {sorted(overlap)}"
            raise ShapeError(msg)
        seen.update(group)


def entropy(t: JointTable, axes: Sequence[str]) -> float:
    """Shannon entropy of the marginal over axes, in bits."""
    if not axes:
        msg = "entropy needs at least one axis"
        raise ShapeError(msg)
    for a in axes:
        t.index(a)
    return _h(t, axes)


def cond_entropy(t: JointTable, a: Sequence[str], c: Sequence[str] = ()) -> float:
    """H(A|C) in bits."""
    _check_disjoint(a, c)
    return max(_h(t, [*a, *c]) - _h(t, c), 0.0)


def cond_mutual_info(t: JointTable, a: Sequence[str], b: Sequence[str], c: Sequence[str] = ()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), in bits."""
    _check_disjoint(a, b, c)
    for axis in (*a, *b, *c):
        t.index(axis)
    value = _h(t, [*a, *c]) + _h(t, [*b, *c]) - _h(t, [*a, *b, *c]) - _h(t, c)
    return max(value, 0.0)


def assemble_joint(
    chain: StateChain,
    d: int,
    aux: AuxiliaryScheme,
    ch: DiscreteWiretapChannel,
) -> JointTable:
    """Joint law pi(s~) K^d(s~,s) P(u|s~) P(v|u,s~) P(x|u,v,s~) P(y,z|x,s).

    Axes are (u, v, sd, s, x, y, z) where ``sd`` is the delayed state.
    """
    if aux.k != chain.k:
        msg = f"Axis sd mismatch: auxiliaries cover {aux.k} delayed states, chain has {chain.k}"
        raise ShapeError(msg)
    if ch.ns != chain.k:
        msg = f"Axis s mismatch: channel has {ch.ns} states, chain has {chain.k}"
        raise ShapeError(msg)
    if aux.nx != ch.nx:
        msg = f"Axis x mismatch: auxiliaries emit {aux.nx} inputs, channel accepts {ch.nx}"
        raise ShapeError(msg)
    nu, nv = aux.pv.shape[1:]
    cells = nu * nv * chain.k * chain.k * ch.nx * ch.ny * ch.nz
    if cells > MAX_TABLE_CELLS:
        msg = f"Assembled joint would have {cells:.3e} cells, above the {MAX_TABLE_CELLS:.0e}-cell limit"
        raise GuardrailError(msg)

    pair = delayed_joint(chain, d).table
    probs = np.einsum("ab,au,auv,auvx,bxyz->uvabxyz", pair, aux.pu, aux.pv, aux.px, ch.table)
    return JointTable(JOINT_AXES, probs)


def degraded_identity_check(t: JointTable) -> IdentityCheck:
    """Evaluate both sides of the degraded identity and test X -> (S,S~,Y) -> Z."""
    cond = [S, SD]
    lhs = cond_entropy(t, [Y], [*cond, Z])
    rhs = (
        cond_mutual_info(t, [X], [Y], cond)
        - cond_mutual_info(t, [X], [Z], cond)
        + cond_entropy(t, [Y], [X, Z, *cond])
    )
    markov_residual = cond_mutual_info(t, [X], [Z], [*cond, Y])
    degraded = markov_residual <= IDENTITY_TOL
    if not degraded:
        logger.warning(
            "Table is not degraded (I(X;Z|S,S~,Y) = %.3e); identity residual %.3e",
            markov_residual,
            abs(lhs - rhs),
        )
    return IdentityCheck(lhs=lhs, rhs=rhs, markov_residual=markov_residual, degraded=degraded)


def csiszar_sum_check(t: JointTable, n: int) -> tuple[float, float]:
    """Residuals of the two Csiszar sum identities over a block of length n.

    Axes are ``w``, ``y1..yn``, ``z1..zn`` and any number of state axes whose
    names start with ``s`` (the state block S^N, always conditioned on).
    """
    if not 1 <= n <= MAX_CSISZAR_N:
        per_step = t.sizes.get("y1", 2) * t.sizes.get("z1", 2)
        estimate = float(per_step) ** n
        msg = f"Csiszar check supports block lengths 1..{MAX_CSISZAR_N}; n={n} needs about {estimate:.3e} cells"
        raise GuardrailError(msg)
    ys = [f"y{i}" for i in range(1, n + 1)]
    zs = [f"z{i}" for i in range(1, n + 1)]
    for axis in (*ys, *zs):
        t.index(axis)
    states = [a for a in t.axes if a.startswith("s")]
    extra = [a for a in t.axes if a not in (*ys, *zs, *states)]

    def sums(base: list[str]) -> tuple[float, float]:
        left = right = 0.0
        for i in range(n):
            past_y = ys[:i]
            future_z = zs[i + 1 :]
            if future_z:
                left += cond_mutual_info(t, [ys[i]], future_z, [*past_y, *states, *base])
            if past_y:
                right += cond_mutual_info(t, [zs[i]], past_y, [*future_z, *states, *base])
        return left, right

    plain = sums([])
    with_message = sums(extra)
    return abs(plain[0] - plain[1]), abs(with_message[0] - with_message[1])


def split_rate_region(t: JointTable) -> SplitRateRegion:
    """Common, private and equivocation caps of the rate-split inner region."""
    cond = [S, SD]
    common = min(cond_mutual_info(t, [U], [Y], cond), cond_mutual_info(t, [U], [Z], cond))
    private = cond_mutual_info(t, [V], [Y], [U, *cond])
    leak = cond_mutual_info(t, [V], [Z], [U, *cond])
    return SplitRateRegion(common=common, private=private, equivocation=max(0.0, private - leak))


def key_rate_bound(t: JointTable) -> float:
    """Largest feedback key rate the key-agreement step supports.

    min{H(Y|V,Z,S,S~), I(V;Z|U,S,S~)} when the receiver is stronger, and
    min{H(Y|V,Z,S,S~), I(V;Y|U,S,S~)} otherwise; both collapse to the
    minimum of the three terms.
    """
    cond = [S, SD]
    residual = cond_entropy(t, [Y], [V, Z, *cond])
    to_receiver = cond_mutual_info(t, [V], [Y], [U, *cond])
    to_eavesdropper = cond_mutual_info(t, [V], [Z], [U, *cond])
    return min(residual, to_receiver, to_eavesdropper)


def entropy_bits(probs: np.ndarray, axis: int | tuple[int, ...] = -1) -> np.ndarray:
    """Entropy along axis of an array of distributions."""
    return special.entr(np.asarray(probs, dtype=float)).sum(axis=axis) / LN2


def mutual_info_bits(input_law: np.ndarray, transition: np.ndarray) -> np.ndarray:
    """I(X;Y) for input laws (..., nx) through a channel (nx, ny)."""
    input_law = np.asarray(input_law, dtype=float)
    output = input_law @ transition
    noise = entropy_bits(transition)
    return entropy_bits(output) - input_law @ noise
