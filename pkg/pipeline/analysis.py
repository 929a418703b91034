"""
Run-outcome measurements: connectivity, octile path lengths, wall clearance
and hole counting. Everything here is a pure function of its arguments.

Foreground (occupied) cells are 8-connected; background cells 4-connected.
"""

import math
from itertools import combinations
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from backend.models import RunMetrics
from pipeline.arena import EIGHT_CONNECTED, Arena, Source

SQRT2 = math.sqrt(2.0)
ANCHOR_RADIUS = 2

_NEIGHBOURS = [
    (dr, dc, SQRT2 if dr and dc else 1.0)
    for dr in (-1, 0, 1)
    for dc in (-1, 0, 1)
    if dr or dc
]


def octile(dr: int, dc: int) -> float:
    a, b = abs(dr), abs(dc)
    return max(a, b) - min(a, b) + SQRT2 * min(a, b)


def connected_components(occupied: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(occupied, structure=EIGHT_CONNECTED)
    return labels, int(count)


def hole_count(occupied: np.ndarray) -> int:
    """Background components that cannot reach the lattice border."""
    labels, count = ndimage.label(~occupied)
    border = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    touching = np.unique(border[border > 0])
    return int(count - touching.size)


def wall_clearance(occupied: np.ndarray, arena: Arena) -> float:
    """Smallest Euclidean distance from an occupied cell to a wall or impassable
    obstacle cell; inf when either set is empty."""
    if not occupied.any() or not arena.sink_mask.any():
        return math.inf
    distance = ndimage.distance_transform_edt(~arena.sink_mask)
    return float(distance[occupied].min())


# ---------------------------------------------------------------------------
# Octile shortest paths
# ---------------------------------------------------------------------------


def _grid_graph(mask: np.ndarray):
    """8-connected octile edges between mask cells: the cell index grid (-1
    off mask), the node count n and edge lists that callers extend with
    terminal nodes numbered from n."""
    height, width = mask.shape
    index = np.full(mask.shape, -1, dtype=np.int64)
    n = int(np.count_nonzero(mask))
    index[mask] = np.arange(n)

    src_parts, dst_parts, w_parts = [], [], []
    for dr, dc, w in _NEIGHBOURS:
        a = index[max(dr, 0): height + min(dr, 0), max(dc, 0): width + min(dc, 0)]
        b = index[max(-dr, 0): height + min(-dr, 0), max(-dc, 0): width + min(-dc, 0)]
        both = (a >= 0) & (b >= 0)
        src_parts.append(b[both])
        dst_parts.append(a[both])
        w_parts.append(np.full(int(both.sum()), w))
    return index, n, src_parts, dst_parts, w_parts


def _csr(n: int, src_parts, dst_parts, w_parts) -> csr_matrix:
    return csr_matrix(
        (np.concatenate(w_parts), (np.concatenate(src_parts), np.concatenate(dst_parts))),
        shape=(n, n),
    )


def anchor_cost(source: Source, shape: tuple[int, int], radius: int = ANCHOR_RADIUS,
                habitable: Optional[np.ndarray] = None) -> np.ndarray:
    """Octile walking distance from source to each cell within Chebyshev radius
    of it; inf elsewhere.

    With a habitable mask the walk stays on habitable cells inside that
    radius, so a cell across a wall from the source is out of reach.
    """
    height, width = shape
    near = np.zeros(shape, dtype=bool)
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            rows = source.rows + dr
            cols = source.cols + dc
            inside = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
            near[rows[inside], cols[inside]] = True
    if habitable is None:
        habitable = np.ones(shape, dtype=bool)

    r0 = max(int(source.rows.min()) - radius, 0)
    c0 = max(int(source.cols.min()) - radius, 0)
    box = (slice(r0, int(source.rows.max()) + radius + 1), slice(c0, int(source.cols.max()) + radius + 1))
    walkable = near[box] & habitable[box]
    seeds = np.zeros_like(walkable)
    seeds[source.rows - r0, source.cols - c0] = True
    seeds &= walkable

    cost = np.full(shape, np.inf)
    if not seeds.any():
        return cost
    index, n, src, dst, w = _grid_graph(walkable)
    # seed edges carry +1 so none of them is zero-weight
    src.append(np.full(int(seeds.sum()), n))
    dst.append(index[seeds])
    w.append(np.ones(int(seeds.sum())))
    dist = dijkstra(_csr(n + 1, src, dst, w), directed=True, indices=n)[:n] - 1.0
    local = np.full(walkable.shape, np.inf)
    local[walkable] = dist
    cost[box] = local
    return cost


def _terminal_distance(mask: np.ndarray, start_cost: np.ndarray, end_cost: np.ndarray) -> Optional[float]:
    """Cheapest 8-connected octile walk through mask cells, paying start_cost at
    the first cell and end_cost at the last. None if no such walk exists."""
    starts = mask & np.isfinite(start_cost)
    ends = mask & np.isfinite(end_cost)
    if not starts.any() or not ends.any():
        return None

    index, n, src_parts, dst_parts, w_parts = _grid_graph(mask)
    # terminal edges carry +1 so none of them is zero-weight
    s, t = n, n + 1
    src_parts += [np.full(int(starts.sum()), s), index[ends]]
    dst_parts += [index[starts], np.full(int(ends.sum()), t)]
    w_parts += [start_cost[starts] + 1.0, end_cost[ends] + 1.0]

    dist = dijkstra(_csr(n + 2, src_parts, dst_parts, w_parts), directed=True, indices=s)[t]
    if not np.isfinite(dist):
        return None
    return float(dist - 2.0)


def oracle_shortest_path(arena: Arena, source_a: Source, source_b: Source) -> Optional[float]:
    """Shortest octile path between two sources over habitable cells; None if unreachable."""
    start = np.full(arena.cells.shape, np.inf)
    start[source_a.rows, source_a.cols] = 0.0
    end = np.full(arena.cells.shape, np.inf)
    end[source_b.rows, source_b.cols] = 0.0
    return _terminal_distance(arena.habitable_mask, start, end)


def occupied_path_length(occupied: np.ndarray, source_a: Source, source_b: Source,
                         habitable: Optional[np.ndarray] = None) -> Optional[float]:
    """Octile path through occupied cells only, entering within ANCHOR_RADIUS of
    source_a and leaving within ANCHOR_RADIUS of source_b. The gap from each
    source to the path end is charged at its walking length over habitable
    cells. None if disconnected."""
    return _terminal_distance(
        occupied,
        anchor_cost(source_a, occupied.shape, habitable=habitable),
        anchor_cost(source_b, occupied.shape, habitable=habitable),
    )


def sources_connected(occupied: np.ndarray, sources: list[Source],
                      labels: Optional[np.ndarray] = None,
                      habitable: Optional[np.ndarray] = None) -> bool:
    """Some single 8-connected component comes within reach (ANCHOR_RADIUS) of
    every source."""
    if not sources:
        return False
    if labels is None:
        labels, _ = connected_components(occupied)
    shared: Optional[set[int]] = None
    for src in sources:
        near = np.isfinite(anchor_cost(src, occupied.shape, habitable=habitable)) & occupied
        found = set(np.unique(labels[near]).tolist()) - {0}
        shared = found if shared is None else shared & found
        if not shared:
            return False
    return True


def outermost_pair(arena: Arena) -> Optional[tuple[Source, Source, float]]:
    """Pair of active sources with the greatest reachable oracle distance."""
    best = None
    for a, b in combinations(arena.active_sources(), 2):
        length = oracle_shortest_path(arena, a, b)
        if length is not None and (best is None or length > best[2]):
            best = (a, b, length)
    return best


def measure(step: int, occupied: np.ndarray, arena: Arena,
            pair: Optional[tuple[Source, Source, float]]) -> RunMetrics:
    labels, components = connected_components(occupied)
    connected = sources_connected(occupied, arena.active_sources(), labels, arena.habitable_mask)
    path = None
    if pair is not None:
        # particles sitting on obstacle cells do not count as path
        path = occupied_path_length(occupied & arena.habitable_mask, pair[0], pair[1], arena.habitable_mask)
    clearance = wall_clearance(occupied, arena)
    return RunMetrics(
        step=step,
        population=int(np.count_nonzero(occupied)),
        component_count=components,
        sources_connected=connected,
        occupied_path_length=path,
        min_wall_clearance=None if math.isinf(clearance) else clearance,
        hole_count=hole_count(occupied),
    )
