"""
Run output files: metrics.csv, result.txt and the effective config.cfg.
"""

from pathlib import Path
from typing import Optional, Union

import pandas as pd

from backend.models import RunMetrics, RunSummary

METRICS_FILE = "metrics.csv"
RESULT_FILE = "result.txt"
CONFIG_FILE = "config.cfg"
FRAMES_DIR = "frames"

METRICS_COLUMNS = ["step", "population", "components", "sources_connected", "path_length", "clearance", "holes"]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def metrics_frame(metrics: list[RunMetrics]) -> pd.DataFrame:
    history = [
        {
            "step": m.step,
            "population": m.population,
            "components": m.component_count,
            "sources_connected": m.sources_connected,
            "path_length": m.occupied_path_length,
            "clearance": m.min_wall_clearance,
            "holes": m.hole_count,
        }
        for m in metrics
    ]
    return pd.DataFrame(history, columns=METRICS_COLUMNS)


def write_metrics_csv(metrics: list[RunMetrics], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = metrics_frame(metrics)
    df["sources_connected"] = df["sources_connected"].map({True: "true", False: "false"})
    df.to_csv(path, index=False, na_rep="", lineterminator="\n")
    return path


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, header=0, true_values=["true"], false_values=["false"])


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


def _text(value: object) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def format_result(summary: RunSummary) -> str:
    return "".join(f"{key}: {_text(value)}\n" for key, value in summary.model_dump().items())


def write_result(summary: RunSummary, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_result(summary), encoding="utf-8")
    return path


def read_result(path: Union[str, Path]) -> dict[str, str]:
    result = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(":")
        result[key.strip()] = value.strip()
    return result


# ---------------------------------------------------------------------------
# Run directory
# ---------------------------------------------------------------------------


def prepare_run_dir(out_dir: Union[str, Path], config_text: str, with_frames: bool) -> Optional[Path]:
    """Create the output directory, write config.cfg, and return the frames
    directory (None when frames are off)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_FILE).write_text(config_text, encoding="utf-8")
    if not with_frames:
        return None
    frames = out_dir / FRAMES_DIR
    frames.mkdir(exist_ok=True)
    return frames


def save_run(out_dir: Union[str, Path], metrics: list[RunMetrics], summary: RunSummary) -> None:
    out_dir = Path(out_dir)
    write_metrics_csv(metrics, out_dir / METRICS_FILE)
    write_result(summary, out_dir / RESULT_FILE)
