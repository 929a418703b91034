"""
Shared diffusive chemoattractant field and the occupancy grid.

Cells are addressed (row, col); continuous points are (x, y) in pixel units
with x along columns. Wall cells are permanent sinks: they always read 0,
ignore deposits, and absorb whatever diffuses into them. Negative values
are repellent and allowed everywhere else.
"""

from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter

from backend.models import DiffusionParams
from pipeline.errors import BoundsError, ConfigError, InvariantViolation

EMPTY = -1


class ChemoLattice:
    def __init__(self, width: int, height: int, sink_mask: Optional[np.ndarray] = None):
        if width < 3 or height < 3:
            raise ConfigError(f"lattice must be at least 3x3, got {width}x{height}")
        self.value = np.zeros((height, width), dtype=np.float64)
        if sink_mask is None:
            sink_mask = np.zeros((height, width), dtype=bool)
        elif sink_mask.shape != (height, width):
            raise ConfigError(f"sink mask shape {sink_mask.shape} does not match {height}x{width}")
        self.sink_mask = np.ascontiguousarray(sink_mask, dtype=bool)
        self._has_sinks = bool(self.sink_mask.any())

    @classmethod
    def from_array(cls, value: np.ndarray, sink_mask: Optional[np.ndarray] = None) -> "ChemoLattice":
        height, width = value.shape
        lattice = cls(width, height, sink_mask)
        lattice.value[:] = value
        lattice.clamp_sinks()
        return lattice

    @property
    def width(self) -> int:
        return self.value.shape[1]

    @property
    def height(self) -> int:
        return self.value.shape[0]

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def clamp_sinks(self) -> None:
        if self._has_sinks:
            self.value[self.sink_mask] = 0.0

    def total(self) -> float:
        return float(self.value.sum())


def diffuse_and_damp(lattice: ChemoLattice, params: DiffusionParams = DiffusionParams()) -> ChemoLattice:
    """Mean filter every cell from the pre-step snapshot, then scale by damping.

    Off-lattice and sink samples count as 0 but stay in the divisor
    (kernel_size squared). Updates in place and returns the lattice.
    """
    snapshot = lattice.value
    if lattice._has_sinks:
        snapshot = np.where(lattice.sink_mask, 0.0, snapshot)
    mean = uniform_filter(snapshot, size=params.kernel_size, mode="constant", cval=0.0)
    np.multiply(mean, params.damping, out=mean)
    lattice.value = mean
    lattice.clamp_sinks()
    return lattice


def deposit(lattice: ChemoLattice, cell: tuple[int, int], amount: float) -> ChemoLattice:
    row, col = cell
    if not lattice.in_bounds(row, col):
        raise BoundsError(f"deposit at {cell} outside {lattice.height}x{lattice.width} lattice")
    if not lattice.sink_mask[row, col]:
        lattice.value[row, col] += amount
    return lattice


def sample(lattice: ChemoLattice, point: tuple[float, float]) -> float:
    x, y = point
    col, row = int(np.floor(x)), int(np.floor(y))
    if not lattice.in_bounds(row, col) or lattice.sink_mask[row, col]:
        return 0.0
    return float(lattice.value[row, col])


def window_count(mask: np.ndarray, size: int) -> np.ndarray:
    """Number of True cells in the size x size window centred on each cell.

    Summed-area table with inclusion-exclusion; off-lattice counts as empty.
    """
    r = size // 2
    padded = np.pad(mask.astype(np.int32), ((r + 1, r), (r + 1, r)))
    sat = padded.cumsum(axis=0).cumsum(axis=1)
    return sat[size:, size:] - sat[:-size, size:] - sat[size:, :-size] + sat[:-size, :-size]


# ---------------------------------------------------------------------------
# Occupancy
# ---------------------------------------------------------------------------


class OccupancyGrid:
    """At most one particle id per cell; EMPTY (-1) marks a free cell."""

    def __init__(self, width: int, height: int):
        self.occupant = np.full((height, width), EMPTY, dtype=np.int32)

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupant.shape

    def is_free(self, row: int, col: int) -> bool:
        return self.occupant[row, col] == EMPTY

    def place(self, pid: int, row: int, col: int) -> None:
        if not self.is_free(row, col):
            raise InvariantViolation(f"cell ({row}, {col}) already holds particle {self.occupant[row, col]}")
        self.occupant[row, col] = pid

    def vacate(self, row: int, col: int) -> None:
        self.occupant[row, col] = EMPTY

    def move(self, pid: int, src: tuple[int, int], dst: tuple[int, int]) -> None:
        self.place(pid, *dst)
        self.vacate(*src)

    def occupied_mask(self) -> np.ndarray:
        return self.occupant != EMPTY

    def count(self) -> int:
        return int(np.count_nonzero(self.occupant != EMPTY))

    def rebuild(self, rows: np.ndarray, cols: np.ndarray) -> None:
        """Reset so particle i sits at (rows[i], cols[i])."""
        self.occupant.fill(EMPTY)
        self.occupant[rows, cols] = np.arange(rows.size, dtype=np.int32)

    def check(self, expected: Optional[int] = None) -> None:
        ids = self.occupant[self.occupant != EMPTY]
        if np.unique(ids).size != ids.size:
            raise InvariantViolation("particle registered in more than one cell")
        if expected is not None and ids.size != expected:
            raise InvariantViolation(f"{ids.size} occupied cells for {expected} particles")
