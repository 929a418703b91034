"""
morphadapt command line.

    python backend/main.py run --preset fig1_simple --seed 42 --out out/
    python backend/main.py run --config scenario.cfg --frames-every 500
    python backend/main.py validate --config scenario.cfg
    python backend/main.py preset-list

Exit codes: 0 converged with all sources connected, 2 run finished without
that, 1 configuration or I/O error (one `error: ...` line on stderr).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

_project_root = Path(__file__).resolve().parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from tqdm import tqdm

from backend import storage
from backend.config import settings
from backend.models import ScenarioConfig
from pipeline import scenario
from pipeline.arena import load_arena
from pipeline.errors import MorphAdaptError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCONNECTED = 2

log = logging.getLogger("morphadapt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "not connected"
    def error(self, message: str) -> None:
        raise UsageError(message)


# ── Helpers ───────────────────────────────────────────────────────────────────


def _setup_logging() -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )


def _load(args: argparse.Namespace) -> ScenarioConfig:
    if (args.preset is None) == (args.config is None):
        raise UsageError("give exactly one of --preset or --config")
    if args.preset is not None:
        return scenario.preset(args.preset)
    return scenario.load_config(args.config)


# ── Commands ──────────────────────────────────────────────────────────────────


def run_command(args: argparse.Namespace) -> int:
    """Run a scenario and write metrics.csv, result.txt and optional frames."""
    cfg = scenario.with_overrides(
        _load(args), seed=args.seed, frame_interval=args.frames_every, metric_interval=args.metrics_every
    )
    frames_dir = storage.prepare_run_dir(args.out, scenario.format_config(cfg), cfg.frame_interval > 0)

    with tqdm(total=cfg.max_steps, desc="steps", leave=False, disable=not sys.stderr.isatty()) as pbar:
        result = scenario.run(cfg, observer=lambda state: pbar.update(), frames_dir=frames_dir)

    storage.save_run(args.out, result.metrics, result.summary)

    summary = result.summary
    print(
        f"{summary.termination_reason} after {summary.steps} steps, "
        f"population {summary.final_population}, "
        f"sources connected: {str(summary.sources_connected).lower()}"
    )
    if summary.termination_reason == "converged" and summary.sources_connected:
        return EXIT_OK
    return EXIT_UNCONNECTED


def validate_command(args: argparse.Namespace) -> int:
    """Parse a scenario and its arena without simulating."""
    cfg = _load(args)
    arena = load_arena(cfg.arena_path, cfg.arena_params)
    for event in cfg.events:
        arena.source(event.source_id)
    print(
        f"ok: {cfg.arena_path.name} {arena.width}x{arena.height}, "
        f"{len(arena.sources)} sources, {len(cfg.events)} events"
    )
    return EXIT_OK


def preset_list_command(args: argparse.Namespace) -> int:
    for name in scenario.preset_names():
        print(name)
    return EXIT_OK


# ── Parser ────────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morphadapt", description="Path planning by a shrinking virtual plasmodium.")
    commands = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--preset", help="Preset scenario name.")
        p.add_argument("--config", type=Path, help="Scenario file.")

    run = commands.add_parser("run", help="Run a scenario.")
    scenario_args(run)
    run.add_argument("--seed", type=int, help="Seed override (u64).")
    run.add_argument("--out", type=Path, default=settings.output_dir, help="Output directory.")
    run.add_argument("--frames-every", type=int, help="Frame interval override.")
    run.add_argument("--metrics-every", type=int, help="Metric interval override.")
    run.set_defaults(handler=run_command)

    validate = commands.add_parser("validate", help="Parse a scenario and its arena without simulating.")
    scenario_args(validate)
    validate.set_defaults(handler=validate_command)

    preset_list = commands.add_parser("preset-list", help="List the built-in presets.")
    preset_list.set_defaults(handler=preset_list_command)
    return parser


# ── Entry point ───────────────────────────────────────────────────────────────


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except (UsageError, MorphAdaptError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
