"""
Arena maps and per-step stimulus projection.

An arena is an 8-bit binary PGM whose pixel values are cell classes:
0 habitable, 64 obstacle, 128 wall, 255 source. Each 8-connected group of
source pixels is one attractant source, numbered from 1 in raster order.

Walls are diffusion sinks and cannot be entered. Obstacles either behave
exactly like walls (impassable mode) or are enterable, non-sink cells that
project a strong repellent once no particle is near them (exposure mode).
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from backend.models import ArenaParams, Event, InitMode
from pipeline.errors import ArenaLoadError, ConfigError, ScenarioError
from pipeline.lattice import ChemoLattice, OccupancyGrid, window_count

log = logging.getLogger(__name__)

MIN_SIDE = 16
MAX_SIDE = 4096
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class CellClass(IntEnum):
    HABITABLE = 0
    OBSTACLE = 64
    WALL = 128
    SOURCE = 255


CELL_CODES = np.array([c.value for c in CellClass], dtype=np.uint8)


@dataclass
class Source:
    id: int
    rows: np.ndarray
    cols: np.ndarray
    strength: float
    active: bool = True

    @property
    def center(self) -> tuple[float, float]:
        """(row, col) centroid."""
        return float(self.rows.mean()), float(self.cols.mean())


@dataclass
class ExposureState:
    # True only at obstacle cells with no particle in their window
    exposed: np.ndarray


@dataclass
class Arena:
    cells: np.ndarray
    sources: list[Source]
    params: ArenaParams = field(default_factory=ArenaParams)

    def __post_init__(self) -> None:
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        self.wall_mask = self.cells == CellClass.WALL
        self.obstacle_mask = self.cells == CellClass.OBSTACLE
        self.source_mask = self.cells == CellClass.SOURCE
        self.habitable_mask = (self.cells == CellClass.HABITABLE) | self.source_mask

        if self.params.obstacle_mode == "impassable":
            self.sink_mask = self.wall_mask | self.obstacle_mask
        else:
            self.sink_mask = self.wall_mask.copy()
        self.enterable_mask = ~self.sink_mask

        near_sink = ndimage.binary_dilation(self.sink_mask, structure=EIGHT_CONNECTED)
        self.wall_adjacent_mask = near_sink & self.enterable_mask

        self._obstacle_rows, self._obstacle_cols = np.nonzero(self.obstacle_mask)
        self._projection: Optional[tuple[np.ndarray, np.ndarray]] = None

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def exposure_mode(self) -> bool:
        return self.params.obstacle_mode == "exposure"

    def source(self, source_id: int) -> Source:
        for src in self.sources:
            if src.id == source_id:
                return src
        raise ScenarioError(f"unknown source id {source_id} (arena has {[s.id for s in self.sources]})")

    def active_sources(self) -> list[Source]:
        return [s for s in self.sources if s.active]

    def eligible_mask(self, init_mode: InitMode) -> np.ndarray:
        if init_mode == "full-cover":
            return self.habitable_mask | (self.obstacle_mask & self.enterable_mask)
        return self.habitable_mask.copy()

    def new_lattice(self) -> ChemoLattice:
        return ChemoLattice(self.width, self.height, self.sink_mask)

    def static_projection(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat indices and per-step amounts for active sources and wall repellent."""
        if self._projection is None:
            amounts = np.zeros(self.cells.shape, dtype=np.float64)
            for src in self.active_sources():
                amounts[src.rows, src.cols] += src.strength
            if self.params.wall_repellent_strength != 0.0:
                amounts[self.wall_adjacent_mask] += self.params.wall_repellent_strength
            flat = np.flatnonzero(amounts)
            self._projection = (flat, amounts.ravel()[flat])
        return self._projection

    def invalidate_projection(self) -> None:
        self._projection = None


# ---------------------------------------------------------------------------
# Loading / writing
# ---------------------------------------------------------------------------


def _pgm_header(path: Path) -> tuple[str, int]:
    """Magic number and maxval of a netpbm file; comments are skipped."""
    with path.open("rb") as fh:
        head = fh.read(512)
    tokens: list[bytes] = []
    for line in head.splitlines():
        tokens.extend(line.split(b"#", 1)[0].split())
        if len(tokens) >= 4:
            break
    if len(tokens) < 4 or not tokens[3].isdigit():
        raise ArenaLoadError(f"{path}: truncated PGM header")
    return tokens[0].decode("ascii", "replace"), int(tokens[3])


def load_arena(path: Union[str, Path], params: Optional[ArenaParams] = None) -> Arena:
    params = params or ArenaParams()
    path = Path(path)
    try:
        # header first: Pillow silently rescales maxval != 255 and accepts P2
        magic, maxval = _pgm_header(path)
        if magic != "P5":
            raise ArenaLoadError(f"{path}: expected binary PGM (P5), got {magic}")
        if maxval != 255:
            raise ArenaLoadError(f"{path}: PGM maxval {maxval}, expected 255")
        with Image.open(path) as img:
            img.load()
            fmt, mode = img.format, img.mode
            cells = np.array(img, dtype=np.uint8)
    except FileNotFoundError:
        raise ArenaLoadError(f"arena file not found: {path}")
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise ArenaLoadError(f"cannot read arena {path}: {e}")

    if fmt != "PPM" or mode != "L":
        raise ArenaLoadError(f"{path}: expected 8-bit greyscale PGM, got {fmt} {mode}")
    height, width = cells.shape
    if not (MIN_SIDE <= width <= MAX_SIDE and MIN_SIDE <= height <= MAX_SIDE):
        raise ArenaLoadError(f"{path}: size {width}x{height} outside [{MIN_SIDE}, {MAX_SIDE}]")

    return arena_from_cells(cells, params, origin=str(path))


def arena_from_cells(cells: np.ndarray, params: Optional[ArenaParams] = None, origin: str = "arena") -> Arena:
    params = params or ArenaParams()
    unknown = ~np.isin(cells, CELL_CODES)
    if unknown.any():
        row, col = np.argwhere(unknown)[0]
        raise ArenaLoadError(
            f"{origin}: unknown pixel code {int(cells[row, col])} at (x={col}, y={row})"
        )

    labels, count = ndimage.label(cells == CellClass.SOURCE, structure=EIGHT_CONNECTED)
    if count == 0:
        raise ArenaLoadError(f"{origin}: no source pixels (value 255)")

    rows, cols = np.nonzero(labels)
    ids = labels[rows, cols]
    order = np.argsort(ids, kind="stable")
    bounds = np.searchsorted(ids[order], np.arange(1, count + 1))
    groups = np.split(order, bounds[1:])
    sources = [
        Source(id=i + 1, rows=rows[g], cols=cols[g], strength=params.source_strength)
        for i, g in enumerate(groups)
    ]
    log.debug("[arena] %s: %dx%d, %d sources", origin, cells.shape[1], cells.shape[0], count)
    return Arena(cells=cells, sources=sources, params=params)


def write_arena(cells: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(cells, dtype=np.uint8), mode="L").save(path, format="PPM")
    return path


# ---------------------------------------------------------------------------
# Per-step operations
# ---------------------------------------------------------------------------


def update_exposure(arena: Arena, occ: OccupancyGrid) -> ExposureState:
    if not arena.exposure_mode:
        raise ConfigError("exposure is only tracked in obstacle_mode = exposure")
    counts = window_count(occ.occupied_mask(), arena.params.exposure_window)
    return ExposureState(exposed=arena.obstacle_mask & (counts == 0))


def project_stimuli(arena: Arena, exposure: Optional[ExposureState], lattice: ChemoLattice) -> ChemoLattice:
    if lattice.value.shape != arena.cells.shape:
        raise ConfigError(f"lattice {lattice.value.shape} does not match arena {arena.cells.shape}")

    flat, amounts = arena.static_projection()
    lattice.value.ravel()[flat] += amounts

    if arena.exposure_mode and arena._obstacle_rows.size:
        if exposure is None:
            raise ConfigError("exposure mode needs an ExposureState")
        rows, cols = arena._obstacle_rows, arena._obstacle_cols
        lattice.value[rows, cols] += np.where(
            exposure.exposed[rows, cols],
            arena.params.exposed_strength,
            arena.params.covered_strength,
        )
    return lattice


def apply_event(arena: Arena, event: Event) -> Arena:
    if event.kind == "remove_source":
        src = arena.source(event.source_id)
        if not src.active:
            raise ScenarioError(f"source {event.source_id} was already removed")
        src.active = False
        arena.invalidate_projection()
        log.info("[arena] source %d removed", event.source_id)
    return arena
