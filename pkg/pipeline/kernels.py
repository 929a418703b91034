"""
numba kernels for the per-particle passes.

Particles live in parallel arrays (xs, ys, thetas, moved) indexed by id and
the occupant grid maps cells back to ids. Every random number a pass may
need is drawn beforehand, one slot per iteration position (per id in the
sense pass), and read only on the branch that uses it, so a pass is a pure
function of its arguments.
"""

import math

import numba as nb
import numpy as np

EMPTY = -1

# sensory decisions
KEEP = 0
RANDOM = 1
RIGHT = 2
LEFT = 3


@nb.njit(cache=True)
def normalize_angle(theta):
    t = theta % 360.0
    if t >= 360.0:
        t = 0.0
    return t


@nb.njit(cache=True)
def choose_turn(f, fl, fr):
    if f > fl and f > fr:
        return KEEP
    if f < fl and f < fr:
        return RANDOM
    if fl < fr:
        return RIGHT
    if fr < fl:
        return LEFT
    return KEEP


@nb.njit(cache=True)
def apply_turn(theta, turn, rotation_angle, u):
    if turn == RIGHT:
        return normalize_angle(theta + rotation_angle)
    if turn == LEFT:
        return normalize_angle(theta - rotation_angle)
    if turn == RANDOM:
        if u < 0.5:
            return normalize_angle(theta - rotation_angle)
        return normalize_angle(theta + rotation_angle)
    return theta


@nb.njit(cache=True)
def sample_cell(value, sink, x, y):
    height, width = value.shape
    col = int(math.floor(x))
    row = int(math.floor(y))
    if row < 0 or col < 0 or row >= height or col >= width:
        return 0.0
    if sink[row, col]:
        return 0.0
    return value[row, col]


@nb.njit(cache=True)
def read_sensors(value, sink, x, y, theta, sensor_offset, cos_sa, sin_sa):
    """(F, FL, FR) with FL at theta - SA and FR at theta + SA.

    cos_sa/sin_sa are the sensor angle's cosine and sine; the side headings
    are rotated from the front one so each read costs two trig calls.
    """
    a = math.radians(theta)
    c = math.cos(a)
    s = math.sin(a)
    f = sample_cell(value, sink, x + sensor_offset * c, y + sensor_offset * s)
    fl = sample_cell(value, sink,
                     x + sensor_offset * (c * cos_sa + s * sin_sa),
                     y + sensor_offset * (s * cos_sa - c * sin_sa))
    fr = sample_cell(value, sink,
                     x + sensor_offset * (c * cos_sa - s * sin_sa),
                     y + sensor_offset * (s * cos_sa + c * sin_sa))
    return f, fl, fr


def sensor_angle_terms(sensor_angle: float) -> tuple[float, float]:
    a = math.radians(sensor_angle)
    return math.cos(a), math.sin(a)


@nb.njit(cache=True)
def sense_pass(xs, ys, thetas, value, sink, draws, sensor_offset, cos_sa, sin_sa, rotation_angle):
    """Orient every particle; draws[i] belongs to particle i.

    A particle's turn depends only on the field and its own state, so the
    pass walks the arrays in memory order. The caller scatters the draws of
    its random visiting order onto ids, which keeps results identical to
    visiting in that order.
    """
    for i in range(xs.size):
        f, fl, fr = read_sensors(value, sink, xs[i], ys[i], thetas[i], sensor_offset, cos_sa, sin_sa)
        thetas[i] = apply_turn(thetas[i], choose_turn(f, fl, fr), rotation_angle, draws[i])


@nb.njit(cache=True, parallel=True)
def sense_pass_parallel(xs, ys, thetas, value, sink, draws, sensor_offset, cos_sa, sin_sa, rotation_angle):
    for i in nb.prange(xs.size):
        f, fl, fr = read_sensors(value, sink, xs[i], ys[i], thetas[i], sensor_offset, cos_sa, sin_sa)
        thetas[i] = apply_turn(thetas[i], choose_turn(f, fl, fr), rotation_angle, draws[i])


@nb.njit(cache=True)
def motor_pass(xs, ys, thetas, moved, occupant, enterable, value, sink,
               order, draws, step_length, deposit_amount):
    height, width = occupant.shape
    for k in range(order.size):
        i = order[k]
        a = math.radians(thetas[i])
        nx = xs[i] + step_length * math.cos(a)
        ny = ys[i] + step_length * math.sin(a)
        row0 = int(math.floor(ys[i]))
        col0 = int(math.floor(xs[i]))
        row = int(math.floor(ny))
        col = int(math.floor(nx))
        blocked = (
            (row == row0 and col == col0)
            or row < 0 or col < 0 or row >= height or col >= width
        )
        if not blocked:
            blocked = (not enterable[row, col]) or occupant[row, col] != EMPTY
        if blocked:
            thetas[i] = normalize_angle(draws[k] * 360.0)
            moved[i] = False
        else:
            occupant[row0, col0] = EMPTY
            occupant[row, col] = i
            xs[i] = nx
            ys[i] = ny
            moved[i] = True
            if not sink[row, col]:
                value[row, col] += deposit_amount


@nb.njit(cache=True)
def growth_pass(xs, ys, moved, occupant, enterable, census, order, draws,
                growth_min, growth_max, radius, spawn_rows, spawn_cols):
    """Divide eligible particles into a random free neighbour cell.

    New particles get ids n, n+1, ... in spawn order and are written to the
    occupant grid immediately; spawn_rows/spawn_cols receive their cells.
    Returns the number spawned.
    """
    height, width = occupant.shape
    n = xs.size
    side = 2 * radius + 1
    cand_rows = np.empty(side * side, dtype=np.int64)
    cand_cols = np.empty(side * side, dtype=np.int64)
    spawned = 0
    for k in range(order.size):
        i = order[k]
        if not moved[i]:
            continue
        row0 = int(math.floor(ys[i]))
        col0 = int(math.floor(xs[i]))
        c = census[row0, col0]
        if c < growth_min or c > growth_max:
            continue
        m = 0
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if dr == 0 and dc == 0:
                    continue
                r = row0 + dr
                cc = col0 + dc
                if r < 0 or cc < 0 or r >= height or cc >= width:
                    continue
                if enterable[r, cc] and occupant[r, cc] == EMPTY:
                    cand_rows[m] = r
                    cand_cols[m] = cc
                    m += 1
        if m == 0:
            continue
        j = int(draws[k] * m)
        if j >= m:
            j = m - 1
        occupant[cand_rows[j], cand_cols[j]] = n + spawned
        spawn_rows[spawned] = cand_rows[j]
        spawn_cols[spawned] = cand_cols[j]
        spawned += 1
    return spawned


@nb.njit(cache=True)
def survival_pass(xs, ys, occupant, census, order, radius, survival_max, keep):
    """Delete over-crowded particles one at a time, in order.

    census starts as the pass-start window count and is decremented around
    every deletion, so each test sees the vacancies left by earlier ones.
    Deleted particles get keep[i] = False and their cell is vacated.
    Returns the number deleted.
    """
    height, width = occupant.shape
    removed = 0
    for k in range(order.size):
        i = order[k]
        row0 = int(math.floor(ys[i]))
        col0 = int(math.floor(xs[i]))
        if census[row0, col0] <= survival_max:
            continue
        keep[i] = False
        occupant[row0, col0] = EMPTY
        removed += 1
        for r in range(max(row0 - radius, 0), min(row0 + radius + 1, height)):
            for c in range(max(col0 - radius, 0), min(col0 + radius + 1, width)):
                census[r, c] -= 1
    return removed
