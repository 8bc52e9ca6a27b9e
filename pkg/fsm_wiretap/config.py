"""Experiment configuration loaded from TOML files with dotted overrides."""

from __future__ import annotations

import logging
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from fsm_wiretap.channels import (
    DiscreteWiretapChannel,
    FadingSpec,
    GaussianSpec,
    QuantizationGrid,
    degraded_from,
    gaussian_to_discrete,
    load_channel_json,
    load_matrix_json,
)
from fsm_wiretap.exceptions import ConfigError
from fsm_wiretap.markov import StateChain, two_state, two_state_from_gb

logger = logging.getLogger(__name__)

MODES = ("capacity", "capacity-feedback", "region", "codec", "sweep")
CHANNEL_KINDS = ("discrete", "gaussian", "fading")


@dataclass
class ChainConfig:
    """State process: full matrix, (u, c) or (g, b)."""

    matrix: list[list[float]] | None = None
    u: float | None = None
    c: float | None = None
    g: float | None = None
    b: float | None = None

    def build(self, u: float | None = None) -> StateChain:
        """Construct the chain; ``u`` replaces the configured memory in sweeps."""
        forms = [
            self.matrix is not None,
            self.u is not None or self.c is not None,
            self.g is not None or self.b is not None,
        ]
        if u is not None:
            return two_state(u, 1.0 if self.c is None else self.c)
        if sum(forms) != 1:
            msg = "Chain needs exactly one of: matrix, (u, c), (g, b)"
            raise ConfigError(msg)
        if self.matrix is not None:
            return StateChain.from_matrix(self.matrix)
        if forms[1]:
            if self.u is None or self.c is None:
                msg = "Two-state chain needs both u and c"
                raise ConfigError(msg)
            return two_state(self.u, self.c)
        if self.g is None or self.b is None:
            msg = "Two-state chain needs both g and b"
            raise ConfigError(msg)
        return two_state_from_gb(self.g, self.b)


@dataclass
class GridConfig:
    """Quantization used when a Gaussian channel feeds the codec or simulator."""

    x_points: list[float] = field(default_factory=lambda: [-1.0, 1.0])
    lo: float = -4.0
    hi: float = 4.0
    cells: int = 2


@dataclass
class ChannelConfig:
    """Channel description; ``kind`` selects which fields apply."""

    kind: str = "discrete"
    table_file: str | None = None
    main_file: str | None = None
    wiretap_file: str | None = None
    sigma2: list[float] = field(default_factory=list)
    sigma2_w: float = 1.0
    p0: float = 1.0
    gain_main: list[float] = field(default_factory=list)
    gain_wiretap: list[float] = field(default_factory=list)
    grid: GridConfig = field(default_factory=GridConfig)

    def gaussian(self, sigma2_w: float | None = None) -> GaussianSpec:
        """Gaussian or fading spec, optionally with a different eavesdropper noise."""
        w2 = self.sigma2_w if sigma2_w is None else sigma2_w
        if self.kind == "fading":
            return FadingSpec(tuple(self.sigma2), w2, self.p0, tuple(self.gain_main), tuple(self.gain_wiretap))
        if self.kind == "gaussian":
            return GaussianSpec(tuple(self.sigma2), w2, self.p0)
        msg = f"Channel kind {self.kind!r} has no Gaussian form"
        raise ConfigError(msg)

    def discrete(self, base_dir: Path) -> DiscreteWiretapChannel:
        """Discrete table, read from files or quantized from the Gaussian form."""
        if self.kind in ("gaussian", "fading"):
            grid = QuantizationGrid.uniform(np.asarray(self.grid.x_points), self.grid.lo, self.grid.hi, self.grid.cells)
            return gaussian_to_discrete(self.gaussian(), grid)
        has_table = self.table_file is not None
        has_factors = self.main_file is not None or self.wiretap_file is not None
        if has_table == has_factors:
            msg = "Discrete channel needs exactly one of table_file or (main_file, wiretap_file)"
            raise ConfigError(msg)
        if has_table:
            return load_channel_json(_existing(base_dir, self.table_file))
        if self.main_file is None or self.wiretap_file is None:
            msg = "Degraded channel needs both main_file and wiretap_file"
            raise ConfigError(msg)
        main = load_matrix_json(_existing(base_dir, self.main_file))
        wiretap = load_matrix_json(_existing(base_dir, self.wiretap_file))
        return degraded_from(main, wiretap)


@dataclass
class CodecConfig:
    """Toy multiplexed binning code and experiment size."""

    n: int = 10
    blocks: int = 100
    rates: list[float] = field(default_factory=list)
    binning_rates: list[float] = field(default_factory=list)
    bin_message_rates: list[float] = field(default_factory=list)
    key_rates: list[float] = field(default_factory=list)
    input_law: list[list[float]] | None = None
    feedback: bool = False


@dataclass
class SweepConfig:
    """Grid axes; an empty list means the single configured value."""

    d: list[int] = field(default_factory=list)
    u: list[float] = field(default_factory=list)
    sigma2_w: list[float] = field(default_factory=list)
    feedback: list[bool] = field(default_factory=lambda: [False])


@dataclass
class RegionConfig:
    """Boundary tracing options."""

    n_points: int = 64
    feedback: bool = False


@dataclass
class OutputConfig:
    """Artifact locations, relative to the config file."""

    directory: str = "out"
    stem: str = "result"


@dataclass
class ExperimentConfig:
    """One experiment: a mode plus every section it may read."""

    mode: str = "capacity"
    d: int = 1
    seed: int = 0
    chain: ChainConfig = field(default_factory=ChainConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    region: RegionConfig = field(default_factory=RegionConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self) -> None:
        """Check the invariants shared by every mode."""
        if self.mode not in MODES:
            msg = f"Unknown mode {self.mode!r}; expected one of {', '.join(MODES)}"
            raise ConfigError(msg)
        if self.channel.kind not in CHANNEL_KINDS:
            msg = f"Unknown channel kind {self.channel.kind!r}; expected one of {', '.join(CHANNEL_KINDS)}"
            raise ConfigError(msg)
        if self.d < 0 or any(d < 0 for d in self.sweep.d):
            msg = "Delay d must be non-negative"
            raise ConfigError(msg)

    @property
    def output_dir(self) -> Path:
        """Absolute artifact directory."""
        return self.base_dir / self.output.directory


def _existing(base_dir: Path, name: str) -> Path:
    path = Path(name)
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        msg = f"Referenced file does not exist: {path}"
        raise ConfigError(msg)
    return path


def _build(cls: type, data: dict[str, Any], where: str) -> Any:  # noqa: ANN401
    """Instantiate a config dataclass from a TOML table, rejecting unknown keys."""
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            msg = f"Unknown configuration key {where}{key}"
            raise ConfigError(msg)
        nested = _SECTIONS.get((cls, key))
        if nested is not None:
            if not isinstance(value, dict):
                msg = f"Configuration key {where}{key} must be a table"
                raise ConfigError(msg)
            value = _build(nested, value, f"{where}{key}.")  # noqa: PLW2901
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        msg = f"Invalid configuration section {where or '<root>'}: {exc}"
        raise ConfigError(msg) from exc


_SECTIONS: dict[tuple[type, str], type] = {
    (ExperimentConfig, "chain"): ChainConfig,
    (ExperimentConfig, "channel"): ChannelConfig,
    (ExperimentConfig, "codec"): CodecConfig,
    (ExperimentConfig, "sweep"): SweepConfig,
    (ExperimentConfig, "region"): RegionConfig,
    (ExperimentConfig, "output"): OutputConfig,
    (ChannelConfig, "grid"): GridConfig,
}


def parse_override(assignment: str) -> tuple[list[str], Any]:
    """Split ``a.b.c=value``; the value is read as a TOML literal, else kept as a string."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        msg = f"Override {assignment!r} is not of the form key.path=value"
        raise ConfigError(msg)
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.strip().split("."), value


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Set dotted keys in a nested TOML dictionary."""
    for assignment in overrides:
        path, value = parse_override(assignment)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                msg = f"Override {assignment!r} descends into a non-table key"
                raise ConfigError(msg)
        node[path[-1]] = value
        logger.debug("Config override %s = %r", ".".join(path), value)
    return data


def load_config(path: Path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Read a TOML experiment file and apply ``--set`` overrides."""
    path = Path(path)
    if not path.is_file():
        msg = f"Config file not found: {path}"
        raise ConfigError(msg)
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        msg = f"Config file {path} is not valid TOML: {exc}"
        raise ConfigError(msg) from exc
    apply_overrides(data, overrides or [])
    config = _build(ExperimentConfig, data, "")
    config.base_dir = path.resolve().parent
    config.validate()
    return config
