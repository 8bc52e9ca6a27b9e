"""fsm_wiretap.

Secrecy capacities, capacity-equivocation bounds and a toy random-binning
codec for finite-state Markov wiretap channels with delayed feedback.
"""

__version__ = "0.1.0"

from fsm_wiretap.channels import (
    DiscreteWiretapChannel,
    FadingSpec,
    GaussianSpec,
    QuantizationGrid,
    bsc,
    degraded_from,
)
from fsm_wiretap.data_models import (
    CapacityResult,
    InputLawFamily,
    PowerAllocation,
    RateCaps,
    RatePair,
    RegionBoundary,
    RunReport,
    SweepRecord,
    Trajectory,
)
from fsm_wiretap.exceptions import (
    ChainError,
    ConfigError,
    DegradednessError,
    DomainError,
    FactorizationError,
    FsmWiretapError,
    GuardrailError,
    ShapeError,
)
from fsm_wiretap.markov import StateChain, TwoStateParams, two_state

__all__ = [
    "CapacityResult",
    "ChainError",
    "ConfigError",
    "DegradednessError",
    "DiscreteWiretapChannel",
    "DomainError",
    "FactorizationError",
    "FadingSpec",
    "FsmWiretapError",
    "GaussianSpec",
    "GuardrailError",
    "InputLawFamily",
    "PowerAllocation",
    "QuantizationGrid",
    "RateCaps",
    "RatePair",
    "RegionBoundary",
    "RunReport",
    "ShapeError",
    "StateChain",
    "SweepRecord",
    "Trajectory",
    "TwoStateParams",
    "bsc",
    "degraded_from",
    "two_state",
]
