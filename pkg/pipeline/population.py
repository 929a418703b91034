"""
Particle population and the scheduler.

Particles are stored as parallel arrays; a particle's id is its index, and
ids are reassigned (and the occupancy grid rebuilt) whenever the survival
pass removes particles. One scheduler step runs, in order:

  projection -> sensory pass -> motor pass -> growth pass (every
  division_interval steps) -> survival pass (every removal_interval steps)
  -> diffusion -> step_counter += 1
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from backend.models import GrowthShrinkParams, InitMode, ModelParams, Particle
from pipeline import kernels
from pipeline.arena import Arena, ExposureState, project_stimuli, update_exposure
from pipeline.errors import ConfigError, InvariantViolation
from pipeline.lattice import ChemoLattice, OccupancyGrid, diffuse_and_damp, window_count

log = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """The one generator a run draws from; PCG64 so streams match across platforms."""
    return np.random.Generator(np.random.PCG64(seed))


class Population:
    def __init__(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
        thetas: np.ndarray,
        moved: np.ndarray,
        occupancy: OccupancyGrid,
        rng: np.random.Generator,
        step_counter: int = 0,
    ):
        self.xs = np.ascontiguousarray(xs, dtype=np.float64)
        self.ys = np.ascontiguousarray(ys, dtype=np.float64)
        self.thetas = np.ascontiguousarray(thetas, dtype=np.float64)
        self.moved = np.ascontiguousarray(moved, dtype=np.bool_)
        self.occupancy = occupancy
        self.rng = rng
        self.step_counter = step_counter

    @classmethod
    def empty(cls, width: int, height: int, rng: np.random.Generator) -> "Population":
        none = np.empty(0)
        return cls(none, none, none, np.empty(0, dtype=bool), OccupancyGrid(width, height), rng)

    @classmethod
    def from_particles(cls, particles: list[Particle], width: int, height: int,
                       rng: np.random.Generator) -> "Population":
        """Build from explicit particles; ids are reassigned in list order."""
        pop = cls(
            np.array([p.x for p in particles], dtype=np.float64),
            np.array([p.y for p in particles], dtype=np.float64),
            np.array([p.orientation for p in particles], dtype=np.float64),
            np.array([p.moved_last_step for p in particles], dtype=bool),
            OccupancyGrid(width, height),
            rng,
        )
        for i, (row, col) in enumerate(zip(*pop.cells())):
            pop.occupancy.place(i, int(row), int(col))
        return pop

    @property
    def count(self) -> int:
        return self.xs.size

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        return np.floor(self.ys).astype(np.intp), np.floor(self.xs).astype(np.intp)

    def occupied_mask(self) -> np.ndarray:
        return self.occupancy.occupied_mask()

    def append(self, rows: np.ndarray, cols: np.ndarray, thetas: np.ndarray) -> None:
        """Add particles at cell centres. The caller has already registered them
        in the occupancy grid under ids count, count+1, ..."""
        self.xs = np.concatenate([self.xs, cols + 0.5])
        self.ys = np.concatenate([self.ys, rows + 0.5])
        self.thetas = np.concatenate([self.thetas, thetas])
        self.moved = np.concatenate([self.moved, np.zeros(rows.size, dtype=bool)])

    def keep_only(self, keep: np.ndarray) -> None:
        self.xs = self.xs[keep]
        self.ys = self.ys[keep]
        self.thetas = self.thetas[keep]
        self.moved = self.moved[keep]
        self.occupancy.rebuild(*self.cells())

    def check(self) -> None:
        rows, cols = self.cells()
        self.occupancy.check(expected=self.count)
        if self.count and not np.array_equal(self.occupancy.occupant[rows, cols], np.arange(self.count)):
            raise InvariantViolation("occupancy grid disagrees with particle positions")


@dataclass
class StepReport:
    step: int
    grew: bool = False
    culled: bool = False
    spawned: int = 0
    removed: int = 0
    exposure: Optional[ExposureState] = None


# ---------------------------------------------------------------------------
# Initialisation
# ---------------------------------------------------------------------------


def initialize(arena: Arena, density: float, mode: InitMode, rng: np.random.Generator) -> Population:
    if not 0.0 < density <= 1.0:
        raise ConfigError(f"init density must be in (0, 1], got {density}")

    rows, cols = np.nonzero(arena.eligible_mask(mode))
    chosen = rng.random(rows.size) < density
    rows, cols = rows[chosen], cols[chosen]
    n = rows.size

    # random sub-cell offsets, kept strictly inside the cell
    xs = np.minimum(cols + rng.random(n), np.nextafter(cols + 1.0, -np.inf))
    ys = np.minimum(rows + rng.random(n), np.nextafter(rows + 1.0, -np.inf))
    thetas = rng.random(n) * 360.0

    occ = OccupancyGrid(arena.width, arena.height)
    occ.rebuild(rows, cols)
    log.info("[population] %d particles on %d eligible cells (%s)", n, chosen.size, mode)
    return Population(xs, ys, thetas, np.zeros(n, dtype=bool), occ, rng)


# ---------------------------------------------------------------------------
# Growth / survival
# ---------------------------------------------------------------------------


def census_at(occ: OccupancyGrid, row: int, col: int, window: int) -> int:
    """Particles in the window x window square centred on (row, col), self included."""
    r = window // 2
    block = occ.occupant[max(row - r, 0): row + r + 1, max(col - r, 0): col + r + 1]
    return int(np.count_nonzero(block != kernels.EMPTY))


def growth_test(
    p: Particle,
    occ: OccupancyGrid,
    params: GrowthShrinkParams,
    rng: np.random.Generator,
    enterable_mask: Optional[np.ndarray] = None,
    new_id: Optional[int] = None,
) -> Optional[Particle]:
    """Spawn (and register) one particle next to p if p qualifies, else None."""
    row0, col0 = p.cell
    census = census_at(occ, row0, col0, params.census_window)
    if not (params.growth_min <= census <= params.growth_max and p.moved_last_step):
        return None

    height, width = occ.shape
    r = params.spawn_window // 2
    free = [
        (row, col)
        for row in range(row0 - r, row0 + r + 1)
        for col in range(col0 - r, col0 + r + 1)
        if (row, col) != (row0, col0)
        and 0 <= row < height and 0 <= col < width
        and occ.is_free(row, col)
        and (enterable_mask is None or enterable_mask[row, col])
    ]
    if not free:
        return None

    row, col = free[int(rng.integers(len(free)))]
    pid = new_id if new_id is not None else int(occ.occupant.max()) + 1
    occ.place(pid, row, col)
    return Particle(id=pid, x=col + 0.5, y=row + 0.5, orientation=float(rng.random() * 360.0))


def survival_test(p: Particle, occ: OccupancyGrid, params: GrowthShrinkParams) -> bool:
    """True to keep the particle."""
    return census_at(occ, *p.cell, params.census_window) <= params.survival_max


def growth_pass(pop: Population, arena: Arena, params: GrowthShrinkParams) -> int:
    n = pop.count
    order = pop.rng.permutation(n)
    draws = pop.rng.random(n)
    if n == 0:
        return 0
    census = window_count(pop.occupied_mask(), params.census_window)
    spawn_rows = np.empty(n, dtype=np.int64)
    spawn_cols = np.empty(n, dtype=np.int64)
    spawned = kernels.growth_pass(
        pop.xs, pop.ys, pop.moved, pop.occupancy.occupant, arena.enterable_mask, census,
        order, draws, params.growth_min, params.growth_max, params.spawn_window // 2,
        spawn_rows, spawn_cols,
    )
    if spawned:
        pop.append(spawn_rows[:spawned], spawn_cols[:spawned], pop.rng.random(spawned) * 360.0)
    return int(spawned)


def survival_pass(pop: Population, params: GrowthShrinkParams) -> int:
    """Test every particle in a fresh random order and delete it when its
    window holds more than survival_max particles.

    Censuses are live: a deletion lowers the count of every window it sits
    in before the next particle is tested.
    """
    n = pop.count
    order = pop.rng.permutation(n)
    if n == 0:
        return 0
    census = window_count(pop.occupied_mask(), params.census_window)
    keep = np.ones(n, dtype=np.bool_)
    removed = kernels.survival_pass(
        pop.xs, pop.ys, pop.occupancy.occupant, census, order,
        params.census_window // 2, params.survival_max, keep,
    )
    if removed:
        pop.keep_only(keep)
    return int(removed)


# ---------------------------------------------------------------------------
# Scheduler
# ---------------------------------------------------------------------------


def scheduler_step(
    pop: Population,
    arena: Arena,
    lattice: ChemoLattice,
    params: ModelParams,
    parallel: bool = False,
) -> StepReport:
    report = StepReport(step=pop.step_counter)
    rng = pop.rng
    agent = params.agent

    # 1. projection
    if arena.exposure_mode:
        report.exposure = update_exposure(arena, pop.occupancy)
    project_stimuli(arena, report.exposure, lattice)

    # 2. sensory pass
    n = pop.count
    order = rng.permutation(n)
    draws = rng.random(n)
    draws_by_id = np.empty(n)
    draws_by_id[order] = draws
    sense = kernels.sense_pass_parallel if parallel else kernels.sense_pass
    sense(pop.xs, pop.ys, pop.thetas, lattice.value, lattice.sink_mask, draws_by_id,
          agent.sensor_offset, *kernels.sensor_angle_terms(agent.sensor_angle), agent.rotation_angle)

    # 3. motor pass
    order = rng.permutation(n)
    draws = rng.random(n)
    kernels.motor_pass(pop.xs, pop.ys, pop.thetas, pop.moved, pop.occupancy.occupant,
                       arena.enterable_mask, lattice.value, lattice.sink_mask,
                       order, draws, agent.step_length, agent.deposit_amount)

    # 4/5. growth and survival
    growth = params.growth
    if pop.step_counter % growth.division_interval == 0:
        report.grew = True
        report.spawned = growth_pass(pop, arena, growth)
    if pop.step_counter % growth.removal_interval == 0:
        report.culled = True
        report.removed = survival_pass(pop, growth)

    # 6. diffusion
    diffuse_and_damp(lattice, params.diffusion)

    pop.step_counter += 1
    return report
