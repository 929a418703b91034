"""
Arena drawings used by the presets.

Each layout is drawn with Pillow on a wall-filled canvas and written as a
PGM the first time a preset asks for it. Sources are small discs; their
raster order fixes their ids, so the four-point layout numbers them 1..4
from top to bottom with 1 and 4 the outermost pair.
"""

import logging
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image, ImageDraw

from pipeline.arena import CellClass, write_arena
from pipeline.errors import ConfigError

log = logging.getLogger(__name__)

SIZE = 200
SOURCE_RADIUS = 3

Point = tuple[int, int]

# U-shaped arena: a wall tongue rises from the bottom between two legs
U_SHAPE = [(15, 15), (185, 15), (185, 185), (110, 185), (110, 80), (90, 80), (90, 185), (15, 185)]
# stepped outline for the multi-point experiments
STEPPED = [(15, 15), (120, 15), (120, 50), (185, 50), (185, 185), (80, 185), (80, 150), (15, 150)]
OPEN_BOX = [(15, 15), (185, 15), (185, 185), (15, 185)]


def _draw(outline: list[Point], sources: list[Point],
          obstacles: Callable[[ImageDraw.ImageDraw], None] = lambda d: None) -> np.ndarray:
    img = Image.new("L", (SIZE, SIZE), int(CellClass.WALL))
    draw = ImageDraw.Draw(img)
    draw.polygon(outline, fill=int(CellClass.HABITABLE))
    obstacles(draw)
    for x, y in sources:
        draw.ellipse(
            (x - SOURCE_RADIUS, y - SOURCE_RADIUS, x + SOURCE_RADIUS, y + SOURCE_RADIUS),
            fill=int(CellClass.SOURCE),
        )
    return np.array(img, dtype=np.uint8)


def _disc(draw: ImageDraw.ImageDraw, x: int, y: int, r: int) -> None:
    draw.ellipse((x - r, y - r, x + r, y + r), fill=int(CellClass.OBSTACLE))


def _block(draw: ImageDraw.ImageDraw, box: tuple[int, int, int, int]) -> None:
    draw.rectangle(box, fill=int(CellClass.OBSTACLE))


def u_two_points() -> np.ndarray:
    return _draw(U_SHAPE, [(40, 165), (160, 165)])


def u_corner_points() -> np.ndarray:
    return _draw(U_SHAPE, [(35, 35), (165, 170)])


def four_points() -> np.ndarray:
    return _draw(STEPPED, [(35, 35), (160, 75), (40, 125), (160, 165)])


def scattered_obstacles() -> np.ndarray:
    def obstacles(draw: ImageDraw.ImageDraw) -> None:
        _disc(draw, 100, 100, 18)
        _block(draw, (55, 60, 70, 95))
        _block(draw, (130, 105, 145, 140))
        _disc(draw, 75, 140, 10)
        _disc(draw, 125, 60, 10)

    return _draw(OPEN_BOX, [(30, 100), (170, 100)], obstacles)


def exposure_obstacles() -> np.ndarray:
    def obstacles(draw: ImageDraw.ImageDraw) -> None:
        _block(draw, (80, 35, 100, 85))
        _disc(draw, 135, 70, 12)
        _block(draw, (55, 115, 150, 150))

    return _draw(OPEN_BOX, [(30, 100), (170, 100)], obstacles)


def obstacle_field() -> np.ndarray:
    def obstacles(draw: ImageDraw.ImageDraw) -> None:
        for i, x in enumerate(range(55, 150, 22)):
            offset = 11 if i % 2 else 0
            for y in range(35 + offset, 170, 22):
                _disc(draw, x, y, 5)

    return _draw(OPEN_BOX, [(30, 100), (170, 100)], obstacles)


LAYOUTS: dict[str, Callable[[], np.ndarray]] = {
    "u_two_points": u_two_points,
    "u_corner_points": u_corner_points,
    "four_points": four_points,
    "scattered_obstacles": scattered_obstacles,
    "exposure_obstacles": exposure_obstacles,
    "obstacle_field": obstacle_field,
}


def materialize(name: str, directory: Path) -> Path:
    """Path of the layout's PGM, drawing it first if it is not on disk yet."""
    if name not in LAYOUTS:
        raise ConfigError(f"unknown layout '{name}'")
    path = Path(directory) / f"{name}.pgm"
    if not path.exists():
        write_arena(LAYOUTS[name](), path)
        log.info("[layouts] wrote %s", path)
    return path
