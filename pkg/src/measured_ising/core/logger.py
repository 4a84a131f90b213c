"""
Logging configuration

Records carry a ``run`` attribute naming the run in progress ("-" outside a run), so the
rotating package log and the per-run ``run.log`` can be grepped by run.
"""
import logging
import logging.config
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import yaml

PROJECT_ROOT = Path(__file__).parent.parent.parent.parent
LOGGING_CONFIG_PATH = PROJECT_ROOT / "configs" / "logging.yaml"
PACKAGE_LOGGER = "measured_ising"
RUN_LOG_NAME = "run.log"
RUN_LOG_FORMAT = "%(asctime)s - %(run)s - %(name)s - %(levelname)s - %(message)s"

_current_run = "-"


class RunContextFilter(logging.Filter):
    """Stamp every record with the label of the current run."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run"):
            record.run = _current_run
        return True


def current_run() -> str:
    return _current_run


@contextmanager
def run_log(run_dir: Path, label: str) -> Iterator[Path]:
    """Label records with `label` and copy the package log to run_dir/run.log."""
    global _current_run
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / RUN_LOG_NAME
    handler = logging.FileHandler(path, encoding="utf8")
    handler.setLevel(logging.DEBUG)
    handler.addFilter(RunContextFilter())
    handler.setFormatter(logging.Formatter(RUN_LOG_FORMAT))
    package = logging.getLogger(PACKAGE_LOGGER)
    previous = _current_run
    _current_run = label
    package.addHandler(handler)
    try:
        yield path
    finally:
        package.removeHandler(handler)
        handler.close()
        _current_run = previous


def setup_logging(verbose: bool = False, config_path: Path = LOGGING_CONFIG_PATH):
    """Setup logging configuration from configs/logging.yaml."""
    level = logging.DEBUG if verbose else logging.INFO

    if config_path.exists():
        try:
            with open(config_path, 'rt') as f:
                config_data = yaml.safe_load(f.read())
            logging.config.dictConfig(config_data)
            logging.getLogger(PACKAGE_LOGGER).setLevel(level)
            logging.getLogger().setLevel(level)
            return
        except Exception as e:
            logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
            logging.warning(f"Failed to load logging config from {config_path}: {e}. Using basic config.")
    else:
        logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
        logging.warning(f"{config_path} not found. Using basic config.")
