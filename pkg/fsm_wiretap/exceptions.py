"""Exception hierarchy for the finite-state Markov wiretap package."""

from __future__ import annotations


class FsmWiretapError(Exception):
    """Base class for every error raised by this package."""


class ChainError(FsmWiretapError, ValueError):
    """State transition matrix is not row-stochastic, irreducible or aperiodic."""


class DomainError(FsmWiretapError, ValueError):
    """A parameter lies outside its admissible range."""


class ShapeError(FsmWiretapError, ValueError):
    """Array dimensions or named axes do not line up."""


class DegradednessError(FsmWiretapError, ValueError):
    """Operation requires a degraded channel but got a general one."""


class FactorizationError(FsmWiretapError, ValueError):
    """Joint table violates a required Markov chain or the channel law."""


class GuardrailError(FsmWiretapError, RuntimeError):
    """Requested computation exceeds a desk-scale size limit."""


class ConfigError(FsmWiretapError, ValueError):
    """Experiment configuration is invalid or references missing files."""
