"""Command-line interface for capacity, sweep, region and codec experiments."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import TYPE_CHECKING, Any

from fsm_wiretap.capacity import gaussian_capacity, secrecy_capacity_discrete, secrecy_capacity_discrete_feedback
from fsm_wiretap.codec import code_from_config, golden_block, run_experiment
from fsm_wiretap.config import load_config
from fsm_wiretap.exceptions import ConfigError, GuardrailError
from fsm_wiretap.records import (
    append_jsonl,
    capacity_csv,
    capacity_record,
    region_csv,
    run_report_record,
    sweep_csv,
    write_golden,
    write_json,
)
from fsm_wiretap.region import trace_degraded_region
from fsm_wiretap.simulate import sweep, sweep_grid
from fsm_wiretap.workers import resolve_threads

if TYPE_CHECKING:
    from collections.abc import Callable

    from fsm_wiretap.config import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FLAGGED = 3
EXIT_GUARDRAIL = 4

PLOT_TEMPLATE = '''"""Plot secrecy capacity against the delay d, one curve per series in {csv_name}."""

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

SERIES_KEYS = ("u", "sigma2_w", "feedback")

rows = list(csv.DictReader((Path(__file__).parent / "{csv_name}").open(encoding="utf-8")))
curves = defaultdict(list)
for row in rows:
    if row["value_bits"] == "":
        continue
    label = ", ".join(f"{{key}}={{row[key]}}" for key in SERIES_KEYS if key in row)
    curves[label].append((int(row["d"]), float(row["value_bits"])))

fig, ax = plt.subplots()
for label, points in curves.items():
    points.sort()
    ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=label or None)
ax.set_xlabel("feedback delay d")
ax.set_ylabel("secrecy capacity (bits/use)")
if any(curves):
    ax.legend()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''


def _params(config: ExperimentConfig) -> dict[str, Any]:
    params: dict[str, Any] = {
        "mode": config.mode,
        "channel": config.channel.kind,
        "d": config.d,
        "seed": config.seed,
    }
    for name in ("u", "c", "g", "b"):
        value = getattr(config.chain, name)
        if value is not None:
            params[name] = value
    return params


def plot_script(csv_name: str) -> str:
    """Matplotlib script text that reads only the sweep CSV next to it."""
    return PLOT_TEMPLATE.format(csv_name=csv_name)


def cmd_capacity(config: ExperimentConfig, threads: int) -> int:
    """Secrecy capacity at the configured delay; prints bits per use."""
    chain = config.chain.build()
    feedback = config.mode == "capacity-feedback"
    if config.channel.kind == "discrete":
        ch = config.channel.discrete(config.base_dir)
        solver = secrecy_capacity_discrete_feedback if feedback else secrecy_capacity_discrete
        result = solver(ch, chain, config.d, threads=threads)
    else:
        if threads > 1:
            logger.debug("Gaussian capacity runs on one thread; ignoring --threads %d", threads)
        result = gaussian_capacity(config.channel.gaussian(), chain, config.d, feedback=feedback)

    params = _params(config)
    out = config.output_dir
    write_json(out / f"{config.output.stem}.json", capacity_record(result, params))
    capacity_csv(out / f"{config.output.stem}.csv", result, params)
    print(f"{result.value:.6f}")  # noqa: T201
    if result.flagged:
        logger.warning("Power optimizer fell back on a non-concave objective; result is flagged")
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, threads: int) -> int:
    """Capacity over the d x u x sigma2_w x feedback grid, written as CSV plus a plot script."""
    settings = config.sweep
    grid = sweep_grid(settings.d or [config.d], settings.u, settings.sigma2_w, settings.feedback)
    records = sweep(config.channel.gaussian(), config.chain.build(), grid, threads=threads)

    out = config.output_dir
    csv_name = f"{config.output.stem}.csv"
    sweep_csv(out / csv_name, records)
    script = out / f"{config.output.stem}_plot.py"
    script.write_text(plot_script(csv_name), encoding="utf-8")
    print(f"{len(records)} grid points written to {out / csv_name}")  # noqa: T201
    return EXIT_FLAGGED if any(r.flagged for r in records) else EXIT_OK


def cmd_region(config: ExperimentConfig, threads: int) -> int:
    """Degraded capacity-equivocation boundary; prints the secrecy capacity corner."""
    ch = config.channel.discrete(config.base_dir)
    chain = config.chain.build()
    modes = [False, True] if config.region.feedback else [False]
    boundaries = [
        trace_degraded_region(ch, chain, config.d, feedback=fb, n_points=config.region.n_points, threads=threads)
        for fb in modes
    ]
    region_csv(config.output_dir / f"{config.output.stem}.csv", boundaries, _params(config))
    corner = max(p.re for p in boundaries[0].points)
    print(f"{corner:.6f}")  # noqa: T201
    return EXIT_OK


def cmd_codec(config: ExperimentConfig, threads: int) -> int:
    """End-to-end toy codec run; prints the exact equivocation in bits per use."""
    report = run_experiment(config, threads)
    out = config.output_dir
    append_jsonl(out / f"{config.output.stem}.jsonl", run_report_record(report, _params(config)))
    code, chain = code_from_config(config)
    write_golden(out / f"{config.output.stem}.golden", golden_block(code, chain), config.seed)
    print(f"{report.equivocation:.6f}")  # noqa: T201
    return EXIT_OK


COMMANDS: dict[str, Callable[[ExperimentConfig, int], int]] = {
    "capacity": cmd_capacity,
    "sweep": cmd_sweep,
    "region": cmd_region,
    "codec": cmd_codec,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment type."""
    parser = argparse.ArgumentParser(prog="fsmwt", description="Finite-state Markov wiretap channel experiments")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (default: FSMWT_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        command = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else None)
        command.add_argument("config", help="Experiment TOML file")
        command.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override a config key, e.g. --set channel.sigma2_w=1000",
        )
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments, run one command and map failures to exit codes."""
    args = build_parser().parse_args(argv)

    # Configure logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        config = load_config(args.config, args.overrides)
        threads = resolve_threads(args.threads)
        return COMMANDS[args.command](config, threads)
    except GuardrailError as exc:
        logger.error("Refused: %s", exc)  # noqa: TRY400
        return EXIT_GUARDRAIL
    except (ConfigError, ValueError) as exc:
        logger.error("Invalid configuration: %s", exc)  # noqa: TRY400
        return EXIT_CONFIG


def main() -> None:
    """Run the CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
