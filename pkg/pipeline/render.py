"""
Greyscale snapshots of the lattice and the blob.

occupancy  occupied 255, wall 128, obstacle 64, everything else 0
field      signed concentration mapped linearly with 0 -> 128 and the
           frame's max |value| at the ends, then gamma corrected
composite  field rendering with occupied cells drawn at 255
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from backend.models import RenderParams
from pipeline.arena import Arena
from pipeline.errors import ConfigError
from pipeline.lattice import ChemoLattice


def _field_levels(value: np.ndarray, gamma: float) -> np.ndarray:
    peak = float(np.abs(value).max()) if value.size else 0.0
    linear = np.full(value.shape, 128.0)
    if peak > 0.0:
        # one slope through 128; +peak lands on 256 and clips to 255
        linear = np.clip(128.0 + 128.0 * value / peak, 0.0, 255.0)
    out = 255.0 * (linear / 255.0) ** gamma
    # truncate, absorbing float noise so gamma = 1 reproduces the linear levels
    return np.clip(np.floor(out + 1e-9), 0.0, 255.0).astype(np.uint8)


def render_frame(
    lattice: ChemoLattice,
    occupied: np.ndarray,
    arena: Arena,
    params: RenderParams = RenderParams(),
) -> np.ndarray:
    shape = arena.cells.shape
    if lattice.value.shape != shape or occupied.shape != shape:
        raise ConfigError(
            f"frame inputs disagree: lattice {lattice.value.shape}, "
            f"occupancy {occupied.shape}, arena {shape}"
        )

    if params.mode == "occupancy":
        frame = np.zeros(shape, dtype=np.uint8)
        frame[arena.obstacle_mask] = 64
        frame[arena.wall_mask] = 128
    else:
        frame = _field_levels(lattice.value, params.gamma)
        if params.mode == "field":
            return frame
    frame[occupied] = 255
    return frame


def frame_name(step: int) -> str:
    return f"frame_{step:08d}.pgm"


def save_frame(frame: np.ndarray, directory: Union[str, Path], step: int) -> Path:
    path = Path(directory) / frame_name(step)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(frame, mode="L").save(path, format="PPM")
    return path
