from pathlib import Path

import numpy as np
import pytest

from backend.models import ConvergenceParams, Event, ScenarioConfig
from pipeline import scenario
from pipeline.arena import load_arena
from pipeline.errors import ConfigError, ScenarioError
from pipeline.scenario import (
    ConvergenceMonitor,
    format_config,
    is_converged,
    jaccard,
    load_config,
    parse_config,
    preset,
    run,
    with_overrides,
)

FULL_CONFIG = """\
# every key, non-default values
arena = maps/box.pgm
seed = 17
so = 9
sa = 60
ra = 30
step_length = 1
deposit = 4.5
damping = 0.85
kernel = 5
census_window = 7
growth_min = 2
growth_max = 8
survival_max = 40
division_interval = 5
removal_interval = 3
exposure_window = 9
source_strength = 7.0
wall_repellent = -6.375
obstacle_mode = exposure
exposed_strength = -5
covered_strength = -0.01
init_mode = full-cover
init_density = 0.4
max_steps = 1234
convergence_window = 300
population_tolerance = 0.01
occupancy_jaccard = 0.9
metric_interval = 50
frame_interval = 100
event = 200 remove_source 2
event = converged remove_source 3   # after the blob settles
"""


@pytest.fixture
def small_config(make_cells, arena_file):
    def _make(**overrides) -> ScenarioConfig:
        sources = overrides.pop("sources", [(6, 6), (25, 25)])
        path = arena_file(make_cells(size=32, sources=sources))
        data = {"arena_path": path, "seed": 5, "max_steps": 60, "metric_interval": 20}
        data.update(overrides)
        return ScenarioConfig.model_validate(data)

    return _make


class TestParseConfig:
    def test_every_key(self, tmp_path):
        cfg = parse_config(FULL_CONFIG, base_dir=tmp_path)
        assert cfg.arena_path == tmp_path / "maps" / "box.pgm"
        assert cfg.seed == 17
        assert cfg.agent_params.sensor_offset == 9.0
        assert cfg.agent_params.sensor_angle == 60.0
        assert cfg.agent_params.rotation_angle == 30.0
        assert cfg.agent_params.deposit_amount == 4.5
        assert cfg.diffusion_params.damping == 0.85
        assert cfg.diffusion_params.kernel_size == 5
        assert cfg.growth_params.census_window == 7
        assert cfg.growth_params.survival_max == 40
        assert cfg.growth_params.removal_interval == 3
        assert cfg.arena_params.exposure_window == 9
        assert cfg.arena_params.wall_repellent_strength == -6.375
        assert cfg.arena_params.obstacle_mode == "exposure"
        assert cfg.arena_params.covered_strength == -0.01
        assert cfg.init_mode == "full-cover"
        assert cfg.init_density == 0.4
        assert cfg.max_steps == 1234
        assert cfg.convergence == ConvergenceParams(window=300, population_tolerance=0.01, occupancy_jaccard=0.9)
        assert cfg.metric_interval == 50
        assert cfg.frame_interval == 100
        assert cfg.events == [Event(step=200, source_id=2), Event(step=None, source_id=3)]

    def test_defaults(self, tmp_path):
        cfg = parse_config("arena = /maps/box.pgm\n", base_dir=tmp_path)
        assert cfg.arena_path == Path("/maps/box.pgm")
        assert cfg.agent_params.sensor_offset == 7.0
        assert cfg.growth_params.division_interval == 10
        assert cfg.init_density == 1.0
        assert cfg.max_steps == 500_000

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 3: unknown key 'speed'"):
            parse_config("arena = a.pgm\n\nspeed = 2\n")

    def test_missing_arena(self):
        with pytest.raises(ConfigError, match="arena"):
            parse_config("seed = 1\n")

    @pytest.mark.parametrize("line, field", [
        ("kernel = 4", "kernel_size"),
        ("max_steps = 0", "max_steps"),
        ("so = 2", "sensor_offset"),
        ("init_density = 1.5", "init_density"),
        ("damping = 0", "damping"),
        ("seed = -1", "seed"),
        ("occupancy_jaccard = 0", "occupancy_jaccard"),
    ])
    def test_invalid_values(self, line, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(f"arena = a.pgm\n{line}\n")

    def test_events_must_be_sorted(self):
        with pytest.raises(ConfigError, match="sorted"):
            parse_config("arena = a.pgm\nevent = 50 remove_source 1\nevent = 10 remove_source 2\n")

    def test_malformed_event(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("arena = a.pgm\nevent = 50 add_source 1\n")

    def test_full_cover_needs_exposure(self):
        with pytest.raises(ConfigError, match="exposure"):
            parse_config("arena = a.pgm\ninit_mode = full-cover\n")

    def test_format_reproduces_config(self, tmp_path):
        cfg = parse_config(FULL_CONFIG, base_dir=tmp_path)
        assert parse_config(format_config(cfg)) == cfg

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="missing.cfg"):
            load_config(tmp_path / "missing.cfg")

    def test_with_overrides_revalidates(self, small_config):
        cfg = small_config()
        assert with_overrides(cfg, seed=9).seed == 9
        assert with_overrides(cfg, seed=None).seed == cfg.seed
        with pytest.raises(ConfigError):
            with_overrides(cfg, metric_interval=0)


class TestPresets:
    def test_all_presets_build(self):
        expected_sources = {
            "fig1_simple": 2,
            "fig2_multisource": 4,
            "fig3_removal_23": 4,
            "fig4_removal_24": 4,
            "fig5_collision_free": 2,
            "fig6_obstacles_multi": 2,
            "fig7_exposure": 2,
            "fig8_obstacle_field": 2,
        }
        assert scenario.preset_names() == list(expected_sources)
        for name, count in expected_sources.items():
            cfg = preset(name)
            arena = load_arena(cfg.arena_path, cfg.arena_params)
            assert len(arena.sources) == count, name
            assert (arena.width, arena.height) == (200, 200)

    def test_collision_free_uses_wall_repellent(self):
        assert preset("fig5_collision_free").arena_params.wall_repellent_strength == -6.375
        assert preset("fig1_simple").arena_params.wall_repellent_strength == 0.0

    def test_exposure_preset(self):
        cfg = preset("fig7_exposure")
        assert cfg.init_mode == "full-cover"
        assert cfg.arena_params.obstacle_mode == "exposure"
        assert cfg.growth_params.removal_interval == 3

    def test_removal_presets_wait_for_convergence(self):
        assert preset("fig3_removal_23").events == [Event(source_id=2), Event(source_id=3)]
        assert preset("fig4_removal_24").events == [Event(source_id=2), Event(source_id=4)]

    def test_four_point_numbering(self):
        arena = load_arena(preset("fig2_multisource").arena_path)
        centers = [s.center for s in arena.sources]
        assert centers == sorted(centers)
        pair = scenario.outermost_pair(arena)
        assert {pair[0].id, pair[1].id} == {1, 4}

    def test_seed(self):
        assert preset("fig1_simple", seed=42).seed == 42

    def test_unknown_preset_lists_valid_names(self):
        with pytest.raises(ConfigError, match="fig1_simple.*fig8_obstacle_field"):
            preset("fig9")


class TestConvergence:
    PARAMS = ConvergenceParams(window=100, population_tolerance=0.005, occupancy_jaccard=0.95)

    def test_jaccard_of_empty_sets(self):
        empty = np.zeros((4, 4), dtype=bool)
        assert jaccard(empty, empty) == 1.0

    def test_stable_series_converges(self):
        occ = np.ones((10, 10), dtype=bool)
        assert is_converged(1000, 1003, occ, occ, self.PARAMS)

    def test_population_change_blocks(self):
        occ = np.ones((10, 10), dtype=bool)
        assert not is_converged(1000, 1010, occ, occ, self.PARAMS)

    def test_shape_change_blocks(self):
        a = np.zeros((10, 10), dtype=bool)
        b = np.zeros((10, 10), dtype=bool)
        a[:, :5] = True
        b[:, 1:6] = True
        assert not is_converged(50, 50, a, b, self.PARAMS)

    def test_monitor_never_fires_on_shrinking_series(self):
        monitor = ConvergenceMonitor(self.PARAMS, every=10)
        occ = np.ones((10, 10), dtype=bool)
        population = 10_000.0
        for step in range(0, 2000, 10):
            assert not monitor.observe(step, int(population), occ)
            population *= 0.999  # 1% per 100-step window

    def test_monitor_waits_a_full_window(self):
        monitor = ConvergenceMonitor(self.PARAMS, every=10)
        occ = np.ones((10, 10), dtype=bool)
        fired = [step for step in range(0, 300, 10) if monitor.observe(step, 500, occ)]
        assert fired[0] == 100

    def test_reset_restarts_the_window(self):
        monitor = ConvergenceMonitor(self.PARAMS, every=10)
        occ = np.ones((10, 10), dtype=bool)
        for step in range(0, 110, 10):
            monitor.observe(step, 500, occ)
        monitor.reset()
        assert not monitor.observe(110, 500, occ)
        assert not monitor.observe(200, 500, occ)
        assert monitor.observe(210, 500, occ)


class TestRun:
    def test_metrics_every_interval(self, small_config):
        result = run(small_config())
        assert [m.step for m in result.metrics] == [0, 20, 40, 60]
        assert result.termination_reason == "max_steps"
        assert result.steps_executed == 60
        assert result.final_occupancy.sum() == result.summary.final_population
        assert result.oracle_length == pytest.approx(19 * 2 ** 0.5)

    def test_replay_is_identical(self, small_config):
        a = run(small_config())
        b = run(small_config())
        assert a.metrics == b.metrics
        assert a.summary == b.summary
        np.testing.assert_array_equal(a.final_occupancy, b.final_occupancy)

    def test_event_does_not_change_the_past(self, small_config):
        plain = run(small_config(max_steps=80))
        removal = run(small_config(max_steps=80, events=[Event(step=50, source_id=2)]))
        assert plain.metrics[:3] == removal.metrics[:3]
        assert removal.summary.oracle_length is None

    def test_unknown_event_source(self, small_config):
        with pytest.raises(ScenarioError):
            run(small_config(events=[Event(step=5, source_id=9)]))

    def test_repeated_removal_rejected(self, small_config):
        with pytest.raises(ScenarioError):
            run(small_config(events=[Event(step=5, source_id=1), Event(step=9, source_id=1)]))

    def test_observer_sees_every_step(self, small_config):
        seen = []
        run(small_config(max_steps=25), observer=lambda state: seen.append(state.report.step))
        assert seen == list(range(25))

    def test_converges_with_loose_criteria(self, small_config):
        loose = ConvergenceParams(window=10, population_tolerance=1.0, occupancy_jaccard=0.01)
        result = run(small_config(max_steps=500, convergence=loose, metric_interval=10))
        assert result.termination_reason == "converged"
        assert result.steps_executed % 10 == 0
        assert result.steps_executed < 500

    def test_deferred_event_applies_after_convergence(self, small_config):
        loose = ConvergenceParams(window=10, population_tolerance=1.0, occupancy_jaccard=0.01)
        states = []
        result = run(
            small_config(max_steps=500, convergence=loose, metric_interval=10,
                         sources=[(6, 6), (16, 16), (25, 25)], events=[Event(source_id=2)]),
            observer=states.append,
        )
        assert result.termination_reason == "converged"
        assert not states[-1].arena.source(2).active
        assert result.steps_executed >= 20

    def test_extinction_is_an_outcome(self, small_config):
        cfg = small_config(growth_params={"survival_max": 0, "removal_interval": 1})
        result = run(cfg)
        assert result.termination_reason == "extinct"
        assert result.steps_executed == 1
        assert result.summary.final_population == 0
        assert not result.summary.sources_connected

    def test_frames(self, small_config, tmp_path):
        frames = tmp_path / "frames"
        run(small_config(max_steps=40, frame_interval=20), frames_dir=frames)
        assert sorted(p.name for p in frames.iterdir()) == [
            "frame_00000000.pgm", "frame_00000020.pgm", "frame_00000040.pgm",
        ]

    def test_no_frames_when_off(self, small_config, tmp_path):
        frames = tmp_path / "frames"
        run(small_config(max_steps=20), frames_dir=frames)
        assert not frames.exists()
