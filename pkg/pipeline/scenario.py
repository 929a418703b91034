"""
Scenario runner: binds an arena, a population and parameters into one
reproducible run with scripted events, convergence detection, metric
sampling and optional frames.

Also owns the flat `key = value` scenario file format and the presets that
reproduce each experiment of the shrinking-blob path planner.
"""

import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numba
import numpy as np
from pydantic import ValidationError

from backend.config import settings
from backend.models import (
    ArenaParams,
    ConvergenceParams,
    Event,
    GrowthShrinkParams,
    RenderParams,
    RunMetrics,
    RunSummary,
    ScenarioConfig,
    TerminationReason,
)
from pipeline import layouts
from pipeline.analysis import measure, outermost_pair
from pipeline.arena import Arena, Source, apply_event, load_arena
from pipeline.errors import ConfigError, InvariantViolation, ScenarioError
from pipeline.lattice import ChemoLattice
from pipeline.population import Population, StepReport, initialize, make_rng, scheduler_step
from pipeline.render import render_frame, save_frame

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class RunState:
    """Live state handed to observers after every scheduler step."""
    population: Population
    arena: Arena
    lattice: ChemoLattice
    report: StepReport


@dataclass
class RunResult:
    final_occupancy: np.ndarray
    metrics: list[RunMetrics]
    termination_reason: TerminationReason
    steps_executed: int
    summary: RunSummary
    oracle_length: Optional[float] = None


Observer = Callable[[RunState], None]


# ---------------------------------------------------------------------------
# Convergence
# ---------------------------------------------------------------------------


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def is_converged(pop_then: int, pop_now: int, occ_then: np.ndarray, occ_now: np.ndarray,
                 params: ConvergenceParams) -> bool:
    change = abs(pop_now - pop_then) / max(pop_then, 1)
    if change >= params.population_tolerance:
        return False
    return jaccard(occ_then, occ_now) >= params.occupancy_jaccard


class ConvergenceMonitor:
    """Keeps occupancy checkpoints and compares each new one with the
    checkpoint taken at least one window earlier."""

    def __init__(self, params: ConvergenceParams, every: int):
        self.params = params
        self.every = max(1, min(every, params.window))
        self._checkpoints: deque[tuple[int, int, np.ndarray]] = deque()

    def reset(self) -> None:
        self._checkpoints.clear()

    def observe(self, step: int, population: int, occupied: np.ndarray) -> bool:
        self._checkpoints.append((step, population, occupied.copy()))
        horizon = step - self.params.window
        # keep only the newest checkpoint at or before the horizon
        while len(self._checkpoints) > 1 and self._checkpoints[1][0] <= horizon:
            self._checkpoints.popleft()
        then_step, then_pop, then_occ = self._checkpoints[0]
        if then_step > horizon:
            return False
        return is_converged(then_pop, population, then_occ, occupied, self.params)


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------


def _configure_threads(threads: Optional[int]) -> bool:
    if not threads or threads < 2:
        return False
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    log.info("[scenario] parallel sensory pass on %d threads", numba.get_num_threads())
    return True


def _validate_events(arena: Arena, events: list[Event]) -> None:
    removed: set[int] = set()
    for event in events:
        arena.source(event.source_id)
        if event.source_id in removed:
            raise ScenarioError(f"source {event.source_id} is removed twice")
        removed.add(event.source_id)


def check_invariants(pop: Population, lattice: ChemoLattice, metrics: RunMetrics,
                     pair: Optional[tuple[Source, Source, float]]) -> None:
    pop.check()
    if np.any(lattice.value[lattice.sink_mask] != 0.0):
        raise InvariantViolation(f"step {metrics.step}: sink cell holds a non-zero value")
    if not np.all(np.isfinite(lattice.value)):
        raise InvariantViolation(f"step {metrics.step}: non-finite field value")
    path = metrics.occupied_path_length
    if pair is not None and path is not None and path < pair[2] - 1e-9:
        raise InvariantViolation(f"step {metrics.step}: path {path} shorter than oracle {pair[2]}")


def summarize(reason: TerminationReason, steps: int, occupied: np.ndarray, arena: Arena,
              pair: Optional[tuple[Source, Source, float]]) -> RunSummary:
    final = measure(steps, occupied, arena, pair)
    return RunSummary(
        termination_reason=reason,
        steps=steps,
        final_population=final.population,
        sources_connected=final.sources_connected,
        components=final.component_count,
        path_length=final.occupied_path_length,
        oracle_length=pair[2] if pair else None,
        clearance=final.min_wall_clearance,
        holes=final.hole_count,
    )


def run(
    config: ScenarioConfig,
    observer: Optional[Observer] = None,
    frames_dir: Optional[Path] = None,
    threads: Optional[int] = None,
) -> RunResult:
    arena = load_arena(config.arena_path, config.arena_params)
    _validate_events(arena, config.events)

    rng = make_rng(config.seed)
    pop = initialize(arena, config.init_density, config.init_mode, rng)
    lattice = arena.new_lattice()
    params = config.model_params
    parallel = _configure_threads(threads if threads is not None else settings.threads)
    render_params = RenderParams(mode=settings.frame_mode, gamma=settings.gamma)

    timed = deque(e for e in config.events if e.step is not None)
    on_convergence = [e for e in config.events if e.step is None]
    due: list[Event] = []

    pair = outermost_pair(arena)
    monitor = ConvergenceMonitor(config.convergence, config.metric_interval)
    metrics: list[RunMetrics] = []

    def sample(step: int) -> None:
        m = measure(step, pop.occupied_mask(), arena, pair)
        check_invariants(pop, lattice, m, pair)
        metrics.append(m)

    def frame(step: int) -> None:
        if frames_dir is not None and config.frame_interval:
            save_frame(render_frame(lattice, pop.occupied_mask(), arena, render_params), frames_dir, step)

    log.info("[scenario] %s: seed %d, %d particles, max %d steps",
             config.arena_path.name, config.seed, pop.count, config.max_steps)
    sample(0)
    frame(0)
    monitor.observe(0, pop.count, pop.occupied_mask())

    reason: TerminationReason = "max_steps"
    while pop.step_counter < config.max_steps:
        step = pop.step_counter
        while timed and timed[0].step <= step:
            due.append(timed.popleft())
        if due:
            for event in due:
                apply_event(arena, event)
            due = []
            pair = outermost_pair(arena)
            monitor.reset()

        report = scheduler_step(pop, arena, lattice, params, parallel)
        done = pop.step_counter
        if observer is not None:
            observer(RunState(pop, arena, lattice, report))
        if config.frame_interval and done % config.frame_interval == 0:
            frame(done)
        if done % config.metric_interval == 0:
            sample(done)

        if pop.count == 0:
            reason = "extinct"
            log.warning("[scenario] population extinct at step %d", done)
            break
        if done % monitor.every == 0 and monitor.observe(done, pop.count, pop.occupied_mask()):
            if on_convergence:
                log.info("[scenario] converged at step %d, applying %d deferred events",
                         done, len(on_convergence))
                due, on_convergence = on_convergence, []
                continue
            reason = "converged"
            log.info("[scenario] converged at step %d", done)
            break

    steps = pop.step_counter
    occupied = pop.occupied_mask()
    summary = summarize(reason, steps, occupied, arena, pair)
    log.info("[scenario] %s after %d steps: population %d, connected %s",
             reason, steps, summary.final_population, summary.sources_connected)
    return RunResult(
        final_occupancy=occupied,
        metrics=metrics,
        termination_reason=reason,
        steps_executed=steps,
        summary=summary,
        oracle_length=summary.oracle_length,
    )


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

# key -> (section, field); section "" is ScenarioConfig itself
CONFIG_KEYS: dict[str, tuple[str, str]] = {
    "arena": ("", "arena_path"),
    "seed": ("", "seed"),
    "so": ("agent_params", "sensor_offset"),
    "sa": ("agent_params", "sensor_angle"),
    "ra": ("agent_params", "rotation_angle"),
    "step_length": ("agent_params", "step_length"),
    "deposit": ("agent_params", "deposit_amount"),
    "damping": ("diffusion_params", "damping"),
    "kernel": ("diffusion_params", "kernel_size"),
    "census_window": ("growth_params", "census_window"),
    "growth_min": ("growth_params", "growth_min"),
    "growth_max": ("growth_params", "growth_max"),
    "survival_max": ("growth_params", "survival_max"),
    "division_interval": ("growth_params", "division_interval"),
    "removal_interval": ("growth_params", "removal_interval"),
    "exposure_window": ("arena_params", "exposure_window"),
    "source_strength": ("arena_params", "source_strength"),
    "wall_repellent": ("arena_params", "wall_repellent_strength"),
    "obstacle_mode": ("arena_params", "obstacle_mode"),
    "exposed_strength": ("arena_params", "exposed_strength"),
    "covered_strength": ("arena_params", "covered_strength"),
    "init_mode": ("", "init_mode"),
    "init_density": ("", "init_density"),
    "max_steps": ("", "max_steps"),
    "convergence_window": ("convergence", "window"),
    "population_tolerance": ("convergence", "population_tolerance"),
    "occupancy_jaccard": ("convergence", "occupancy_jaccard"),
    "metric_interval": ("", "metric_interval"),
    "frame_interval": ("", "frame_interval"),
}

CONVERGED = "converged"


def _validation_message(exc: ValidationError) -> str:
    return ", ".join(
        f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
    )


def build_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_validation_message(e)) from None


def _parse_event(value: str, lineno: int) -> Event:
    parts = value.split()
    if len(parts) != 3 or parts[1] != "remove_source":
        raise ConfigError(f"line {lineno}: expected 'event = <step> remove_source <id>', got '{value}'")
    step, _, source_id = parts
    try:
        return Event(step=None if step == CONVERGED else int(step), source_id=int(source_id))
    except (ValueError, ValidationError):
        raise ConfigError(f"line {lineno}: bad event '{value}'") from None


def parse_config(text: str, base_dir: Union[str, Path] = ".") -> ScenarioConfig:
    data: dict = {}
    events: list[Event] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "event":
            events.append(_parse_event(value, lineno))
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add(key)
        section, field_name = CONFIG_KEYS[key]
        target = data.setdefault(section, {}) if section else data
        target[field_name] = value

    if "arena_path" not in data:
        raise ConfigError("missing required key 'arena'")
    arena_path = Path(data["arena_path"])
    if not arena_path.is_absolute():
        arena_path = Path(base_dir) / arena_path
    data["arena_path"] = arena_path
    data["events"] = events
    return build_config(data)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    return parse_config(text, base_dir=path.parent)


def format_config(config: ScenarioConfig) -> str:
    dumped = config.model_dump()
    lines = []
    for key, (section, field_name) in CONFIG_KEYS.items():
        value = dumped[section][field_name] if section else dumped[field_name]
        lines.append(f"{key} = {value}")
    for event in config.events:
        step = CONVERGED if event.step is None else event.step
        lines.append(f"event = {step} {event.kind} {event.source_id}")
    return "\n".join(lines) + "\n"


def with_overrides(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Re-validated copy with top-level fields replaced (None values ignored)."""
    data = config.model_dump()
    data.update({k: v for k, v in changes.items() if v is not None})
    return build_config(data)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_SLOW_SHRINK = GrowthShrinkParams(removal_interval=3)
_EXPOSURE = ArenaParams(obstacle_mode="exposure")

PRESETS: dict[str, dict] = {
    "fig1_simple": {"layout": "u_two_points"},
    "fig2_multisource": {"layout": "four_points"},
    "fig3_removal_23": {
        "layout": "four_points",
        "events": [Event(source_id=2), Event(source_id=3)],
    },
    "fig4_removal_24": {
        "layout": "four_points",
        "events": [Event(source_id=2), Event(source_id=4)],
    },
    "fig5_collision_free": {
        "layout": "u_corner_points",
        "arena_params": ArenaParams(wall_repellent_strength=-6.375),
    },
    "fig6_obstacles_multi": {
        "layout": "scattered_obstacles",
        "arena_params": ArenaParams(obstacle_mode="impassable"),
    },
    "fig7_exposure": {
        "layout": "exposure_obstacles",
        "arena_params": _EXPOSURE,
        "init_mode": "full-cover",
        "growth_params": _SLOW_SHRINK,
    },
    "fig8_obstacle_field": {
        "layout": "obstacle_field",
        "arena_params": _EXPOSURE,
        "init_mode": "full-cover",
        "growth_params": _SLOW_SHRINK,
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset(name: str, seed: int = 0) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; valid presets: {', '.join(PRESETS)}")
    entry = dict(PRESETS[name])
    arena_path = layouts.materialize(entry.pop("layout"), settings.arena_dir)
    return build_config({"arena_path": arena_path, "seed": seed, **entry})
