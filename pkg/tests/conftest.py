"""Shared fixtures: small synthetic arenas, lattices and seeded generators."""

from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
import pytest

from backend.config import settings
from backend.models import ArenaParams
from pipeline.arena import Arena, CellClass, arena_from_cells, write_arena
from pipeline.population import make_rng

Cell = tuple[int, int]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow acceptance scenarios")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(1234)


@pytest.fixture(autouse=True)
def arena_dir(tmp_path, monkeypatch) -> Path:
    """Preset arenas are drawn into a per-test directory."""
    directory = tmp_path / "arenas"
    monkeypatch.setattr(settings, "arena_dir", directory)
    monkeypatch.setattr(settings, "threads", None)
    return directory


@pytest.fixture
def make_cells() -> Callable[..., np.ndarray]:
    """Wall-bordered square of habitable cells with single-pixel sources."""

    def _make(
        size: int = 32,
        sources: Iterable[Cell] = ((5, 5), (26, 26)),
        obstacles: Iterable[Cell] = (),
        border: bool = True,
    ) -> np.ndarray:
        cells = np.full((size, size), CellClass.HABITABLE, dtype=np.uint8)
        if border:
            cells[0, :] = cells[-1, :] = cells[:, 0] = cells[:, -1] = CellClass.WALL
        for row, col in obstacles:
            cells[row, col] = CellClass.OBSTACLE
        for row, col in sources:
            cells[row, col] = CellClass.SOURCE
        return cells

    return _make


@pytest.fixture
def make_arena(make_cells) -> Callable[..., Arena]:
    def _make(params: Optional[ArenaParams] = None, **kwargs) -> Arena:
        return arena_from_cells(make_cells(**kwargs), params)

    return _make


@pytest.fixture
def arena_file(tmp_path) -> Callable[[np.ndarray, str], Path]:
    def _write(cells: np.ndarray, name: str = "arena.pgm") -> Path:
        return write_arena(cells, tmp_path / name)

    return _write
