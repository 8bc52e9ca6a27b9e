"""Seeded random instances shared by the test modules."""

from __future__ import annotations

import numpy as np

from fsm_wiretap.channels import DiscreteWiretapChannel, bsc, degraded_from
from fsm_wiretap.infotheory import AuxiliaryScheme
from fsm_wiretap.markov import StateChain

# Degraded two-state binary instance used across the codec and region tests.
MAIN_CROSSOVERS = (0.02, 0.1)
WIRETAP_CROSSOVER = 0.25


def random_stochastic(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Strictly positive rows along the last axis."""
    a = rng.random(shape) + 0.05
    return a / a.sum(axis=-1, keepdims=True)


def random_chain(rng: np.random.Generator, k: int = 2) -> StateChain:
    """Chain with a strictly positive transition matrix."""
    return StateChain(random_stochastic(rng, (k, k)))


def random_degraded_channel(
    rng: np.random.Generator,
    ns: int = 2,
    nx: int = 2,
    ny: int = 2,
    nz: int = 2,
) -> DiscreteWiretapChannel:
    """Random P(y|x,s) followed by a random state-independent P(z|y)."""
    return degraded_from(random_stochastic(rng, (ns, nx, ny)), random_stochastic(rng, (ny, nz)))


def random_aux(rng: np.random.Generator, k: int, nx: int, nu: int = 2, nv: int = 2) -> AuxiliaryScheme:
    """Random factor laws P(u|s~), P(v|u,s~), P(x|u,v,s~)."""
    return AuxiliaryScheme(
        random_stochastic(rng, (k, nu)),
        random_stochastic(rng, (k, nu, nv)),
        random_stochastic(rng, (k, nu, nv, nx)),
    )


def binary_two_state_channel() -> DiscreteWiretapChannel:
    """Main BSC(0.02) / BSC(0.1) per state, eavesdropper link BSC(0.25)."""
    return degraded_from(np.stack([bsc(p) for p in MAIN_CROSSOVERS]), bsc(WIRETAP_CROSSOVER))
