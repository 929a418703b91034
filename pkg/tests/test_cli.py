import numpy as np
import pytest

from backend import storage
from backend.main import EXIT_ERROR, EXIT_OK, EXIT_UNCONNECTED, main
from pipeline.arena import CellClass


@pytest.fixture
def config_file(make_cells, arena_file, tmp_path):
    arena_file(make_cells(size=32, sources=[(6, 6), (25, 25)]), "box.pgm")
    path = tmp_path / "box.cfg"
    path.write_text(
        "arena = box.pgm\n"
        "seed = 3\n"
        "max_steps = 40\n"
        "metric_interval = 20\n"
    )
    return path


class TestPresetList:
    def test_lists_all_presets(self, capsys):
        assert main(["preset-list"]) == EXIT_OK
        names = capsys.readouterr().out.split()
        assert names[0] == "fig1_simple"
        assert len(names) == 8


class TestRun:
    def test_writes_outputs(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_file), "--out", str(out)])
        assert code in (EXIT_OK, EXIT_UNCONNECTED)
        assert (out / "metrics.csv").exists()
        assert (out / "config.cfg").exists()
        summary = storage.read_result(out / "result.txt")
        assert summary["steps"] == "40"
        connected = summary["termination_reason"] == "converged" and summary["sources_connected"] == "true"
        assert (code == EXIT_OK) == connected
        rows = (out / "metrics.csv").read_text().splitlines()
        assert len(rows) == 1 + 3
        assert "after 40 steps" in capsys.readouterr().out

    def test_overrides_leave_config_untouched(self, config_file, tmp_path):
        before = config_file.read_text()
        out = tmp_path / "out"
        code = main([
            "run", "--config", str(config_file), "--out", str(out),
            "--seed", "77", "--metrics-every", "10", "--frames-every", "20",
        ])
        assert code in (EXIT_OK, EXIT_UNCONNECTED)
        assert config_file.read_text() == before
        effective = (out / "config.cfg").read_text()
        assert "seed = 77" in effective
        assert len((out / "metrics.csv").read_text().splitlines()) == 1 + 5
        assert sorted(p.name for p in (out / "frames").iterdir()) == [
            "frame_00000000.pgm", "frame_00000020.pgm", "frame_00000040.pgm",
        ]

    def test_missing_config(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)])
        assert code == EXIT_ERROR
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "missing.cfg" in err

    def test_needs_exactly_one_source_of_config(self, config_file, tmp_path):
        assert main(["run", "--preset", "fig1_simple", "--config", str(config_file)]) == EXIT_ERROR
        assert main(["run", "--out", str(tmp_path)]) == EXIT_ERROR

    def test_unknown_preset(self, tmp_path, capsys):
        assert main(["run", "--preset", "fig42", "--out", str(tmp_path)]) == EXIT_ERROR
        assert "fig1_simple" in capsys.readouterr().err

    def test_bad_seed_is_a_config_error(self, tmp_path):
        assert main(["run", "--preset", "fig1_simple", "--seed", "-1", "--out", str(tmp_path)]) == EXIT_ERROR

    def test_wall_only_arena_fails_cleanly(self, arena_file, tmp_path, capsys):
        cells = np.full((20, 20), CellClass.WALL, dtype=np.uint8)
        arena_file(cells, "walls.pgm")
        path = tmp_path / "walls.cfg"
        path.write_text("arena = walls.pgm\n")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_ERROR
        assert capsys.readouterr().err.startswith("error:")


class TestValidate:
    def test_valid_config(self, config_file, tmp_path, capsys):
        assert main(["validate", "--config", str(config_file)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ok: box.pgm 32x32, 2 sources")
        assert not (tmp_path / "out").exists()

    def test_preset(self):
        assert main(["validate", "--preset", "fig7_exposure"]) == EXIT_OK

    def test_bad_arena(self, make_cells, arena_file, tmp_path, capsys):
        cells = make_cells(size=32)
        cells[4, 9] = 99
        arena_file(cells, "bad.pgm")
        path = tmp_path / "bad.cfg"
        path.write_text("arena = bad.pgm\n")
        assert main(["validate", "--config", str(path)]) == EXIT_ERROR
        assert "99" in capsys.readouterr().err

    def test_event_for_unknown_source(self, config_file):
        config_file.write_text(config_file.read_text() + "event = 10 remove_source 5\n")
        assert main(["validate", "--config", str(config_file)]) == EXIT_ERROR


class TestUsage:
    def test_unknown_command(self, capsys):
        assert main(["no-such-command"]) == EXIT_ERROR
        assert capsys.readouterr().err.startswith("error:")

    def test_no_command(self):
        assert main([]) == EXIT_ERROR

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "preset-list" in capsys.readouterr().out
