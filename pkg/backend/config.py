from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()

_project_root = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    # Parallel sensory pass (absent = deterministic single thread)
    threads: Optional[int] = None

    # Preset arena files are drawn here on first use
    arena_dir: Path = _project_root / "arenas"

    # Default CLI output directory
    output_dir: Path = Path("out")

    # Frame rendering (not part of the scenario file key set)
    frame_mode: Literal["occupancy", "field", "composite"] = "composite"
    gamma: float = 0.6

    # App
    log_level: str = "INFO"

    class Config:
        env_prefix = "MORPHADAPT_"
        env_file = ".env"
        extra = "ignore"


settings = Settings()
