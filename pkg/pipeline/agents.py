"""
Single-particle sensory and motor stages.

These are the reference operations on one Particle; Population runs the
same decisions in bulk through pipeline.kernels.
"""

import math

import numpy as np

from backend.models import AgentParams, Particle
from pipeline.kernels import RANDOM, apply_turn, choose_turn, normalize_angle, read_sensors, sensor_angle_terms
from pipeline.lattice import ChemoLattice, OccupancyGrid, deposit


def sense(p: Particle, lattice: ChemoLattice, params: AgentParams) -> tuple[float, float, float]:
    """(F, FL, FR) readings for the particle's current heading."""
    f, fl, fr = read_sensors(
        lattice.value, lattice.sink_mask, p.x, p.y, p.orientation,
        params.sensor_offset, *sensor_angle_terms(params.sensor_angle),
    )
    return float(f), float(fl), float(fr)


def sense_and_orient(
    p: Particle, lattice: ChemoLattice, params: AgentParams, rng: np.random.Generator
) -> Particle:
    f, fl, fr = sense(p, lattice, params)
    turn = choose_turn(f, fl, fr)
    # the generator is touched only when both sides beat the front
    u = rng.random() if turn == RANDOM else 0.0
    theta = apply_turn(p.orientation, turn, params.rotation_angle, u)
    return p.model_copy(update={"orientation": float(theta)})


def attempt_move(
    p: Particle,
    occ: OccupancyGrid,
    lattice: ChemoLattice,
    enterable_mask: np.ndarray,
    params: AgentParams,
    rng: np.random.Generator,
) -> Particle:
    a = math.radians(p.orientation)
    nx = p.x + params.step_length * math.cos(a)
    ny = p.y + params.step_length * math.sin(a)
    src = p.cell
    dst = (math.floor(ny), math.floor(nx))

    blocked = (
        dst == src
        or not lattice.in_bounds(*dst)
        or not enterable_mask[dst]
        or not occ.is_free(*dst)
    )
    if blocked:
        theta = normalize_angle(rng.random() * 360.0)
        return p.model_copy(update={"orientation": float(theta), "moved_last_step": False})

    occ.move(p.id, src, dst)
    deposit(lattice, dst, params.deposit_amount)
    return p.model_copy(update={"x": nx, "y": ny, "moved_last_step": True})
