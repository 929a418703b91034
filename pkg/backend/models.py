import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

InitMode = Literal["habitable-only", "full-cover"]
ObstacleMode = Literal["impassable", "exposure"]
RenderMode = Literal["occupancy", "field", "composite"]
TerminationReason = Literal["converged", "max_steps", "extinct"]


def _require_odd(value: int) -> int:
    if value % 2 == 0:
        raise ValueError(f"window sizes must be odd, got {value}")
    return value


# ---------------------------------------------------------------------------
# Lattice
# ---------------------------------------------------------------------------

class DiffusionParams(BaseModel):
    kernel_size: int = Field(default=3, ge=3)
    damping: float = Field(default=0.9, gt=0.0, le=1.0)

    @field_validator("kernel_size")
    @classmethod
    def check_odd_kernel(cls, value: int) -> int:
        return _require_odd(value)


# ---------------------------------------------------------------------------
# Agents
# ---------------------------------------------------------------------------

class AgentParams(BaseModel):
    sensor_offset: float = Field(default=7.0, ge=3.0, allow_inf_nan=False)   # SO, pixels
    sensor_angle: float = Field(default=90.0, gt=0.0, le=180.0)              # SA, degrees
    rotation_angle: float = Field(default=45.0, gt=0.0, le=180.0)            # RA, degrees
    step_length: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    deposit_amount: float = Field(default=5.0, allow_inf_nan=False)


class Particle(BaseModel):
    """Single-particle view used by the per-particle operations and tests.

    Bulk simulation keeps particles as parallel arrays inside Population.
    """
    id: int = Field(ge=0)
    x: float
    y: float
    orientation: float = Field(ge=0.0, lt=360.0)  # degrees, clockwise from +x
    moved_last_step: bool = False

    @property
    def cell(self) -> tuple[int, int]:
        """(row, col) of the lattice cell holding the particle."""
        return math.floor(self.y), math.floor(self.x)


# ---------------------------------------------------------------------------
# Population
# ---------------------------------------------------------------------------

class GrowthShrinkParams(BaseModel):
    census_window: int = Field(default=9, ge=1)
    growth_min: int = Field(default=1, ge=0)
    growth_max: int = Field(default=10, ge=0)
    survival_max: int = Field(default=79, ge=0)
    spawn_window: int = Field(default=3, ge=3)
    division_interval: int = Field(default=10, ge=1)
    removal_interval: int = Field(default=2, ge=1)

    @field_validator("census_window", "spawn_window")
    @classmethod
    def check_odd_windows(cls, value: int) -> int:
        return _require_odd(value)

    @model_validator(mode="after")
    def check_thresholds(self) -> "GrowthShrinkParams":
        if self.growth_min > self.growth_max:
            raise ValueError("growth_min must not exceed growth_max")
        if self.survival_max >= self.census_window ** 2:
            raise ValueError("survival_max must be below census_window squared")
        return self


class ModelParams(BaseModel):
    """Everything the scheduler needs for one step."""
    agent: AgentParams = AgentParams()
    growth: GrowthShrinkParams = GrowthShrinkParams()
    diffusion: DiffusionParams = DiffusionParams()


# ---------------------------------------------------------------------------
# Arena
# ---------------------------------------------------------------------------

class ArenaParams(BaseModel):
    source_strength: float = Field(default=6.375, allow_inf_nan=False)
    wall_repellent_strength: float = Field(default=0.0, le=0.0, allow_inf_nan=False)  # 0 = off
    obstacle_mode: ObstacleMode = "impassable"
    exposure_window: int = Field(default=11, ge=1)
    exposed_strength: float = Field(default=-6.375, le=0.0, allow_inf_nan=False)
    covered_strength: float = Field(default=-0.006375, le=0.0, allow_inf_nan=False)

    @field_validator("exposure_window")
    @classmethod
    def check_odd_window(cls, value: int) -> int:
        return _require_odd(value)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

class Event(BaseModel):
    # None means "at the step after convergence is first detected"
    step: Optional[int] = Field(default=None, ge=0)
    kind: Literal["remove_source"] = "remove_source"
    source_id: int = Field(ge=1)


class ConvergenceParams(BaseModel):
    window: int = Field(default=2000, ge=1)
    population_tolerance: float = Field(default=0.005, gt=0.0, le=1.0)
    occupancy_jaccard: float = Field(default=0.95, gt=0.0, le=1.0)


class ScenarioConfig(BaseModel):
    arena_path: Path
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    agent_params: AgentParams = AgentParams()
    growth_params: GrowthShrinkParams = GrowthShrinkParams()
    diffusion_params: DiffusionParams = DiffusionParams()
    arena_params: ArenaParams = ArenaParams()
    init_mode: InitMode = "habitable-only"
    init_density: float = Field(default=1.0, gt=0.0, le=1.0)
    events: list[Event] = []
    max_steps: int = Field(default=500_000, ge=1)
    convergence: ConvergenceParams = ConvergenceParams()
    metric_interval: int = Field(default=100, ge=1)
    frame_interval: int = Field(default=0, ge=0)  # 0 = off

    @model_validator(mode="after")
    def check_scenario(self) -> "ScenarioConfig":
        timed = [e.step for e in self.events if e.step is not None]
        if timed != sorted(timed):
            raise ValueError("events must be sorted by step")
        if self.init_mode == "full-cover" and self.arena_params.obstacle_mode != "exposure":
            raise ValueError("full-cover initialisation needs obstacle_mode = exposure")
        return self

    @property
    def model_params(self) -> ModelParams:
        return ModelParams(
            agent=self.agent_params,
            growth=self.growth_params,
            diffusion=self.diffusion_params,
        )


# ---------------------------------------------------------------------------
# Render
# ---------------------------------------------------------------------------

class RenderParams(BaseModel):
    gamma: float = Field(default=0.6, gt=0.0, allow_inf_nan=False)
    mode: RenderMode = "composite"


# ---------------------------------------------------------------------------
# Analysis / results
# ---------------------------------------------------------------------------

class RunMetrics(BaseModel):
    step: int = Field(ge=0)
    population: int = Field(ge=0)
    component_count: int = Field(ge=0)
    sources_connected: bool
    occupied_path_length: Optional[float] = None   # absent when disconnected
    min_wall_clearance: Optional[float] = None     # absent when infinite
    hole_count: int = Field(ge=0)


class RunSummary(BaseModel):
    termination_reason: TerminationReason
    steps: int
    final_population: int
    sources_connected: bool
    components: int
    path_length: Optional[float] = None
    oracle_length: Optional[float] = None
    clearance: Optional[float] = None
    holes: int
