import os
from pathlib import Path

HOME_ENV = "SABMM_HOME"
OUTPUT_ENV = "SABMM_OUTPUT_DIR"


def get_user_data_dir(app_name: str) -> Path:
    location = os.getenv(HOME_ENV)
    if location:
        return Path(location).expanduser()
    return Path.home() / f".{app_name}"


def get_output_dir(app_name: str, configured: str = "") -> Path:
    location = configured or os.getenv(OUTPUT_ENV)
    if location:
        return Path(location).expanduser()
    return Path.cwd() / f"{app_name}-output"


def get_templates_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "Templates"


def get_litmus_template_path() -> Path:
    return get_templates_dir() / "litmus_template.js"


def get_logs_dir(app_name: str) -> Path:
    return get_user_data_dir(app_name) / "logs"


def get_log_file_path(app_name: str) -> Path:
    return get_logs_dir(app_name) / f"{app_name}.log"
