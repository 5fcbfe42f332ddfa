"""
logging_config.py — Centralized logging configuration.

Call `setup_logging()` once at application entry points (cli.py, eval/run_eval.py).
All modules should use: logger = logging.getLogger(__name__)
"""

import logging
import logging.handlers
import sys

from uav_flocking import config


LOG_FORMAT = "[%(asctime)s] [%(levelname)-8s] [%(name)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
HANDLER_PREFIX = "uav_flocking."


def setup_logging(level: str = "INFO") -> None:
    """
    Configure root logger with:
      - Console handler (stdout)
      - Rotating file handler → config.LOG_FILE (10 MB × 5 backups)

    If the root logger already has handlers (a host application, pytest) none
    are added; only the root level and our own handlers' levels change. This
    lets the CLI re-level after parsing --log-level.
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    root = logging.getLogger()
    root.setLevel(numeric_level)

    if root.handlers:
        for handler in root.handlers:
            if (handler.get_name() or "").startswith(HANDLER_PREFIX):
                handler.setLevel(numeric_level)
        return

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

    # ── Console handler ────────────────────────────────────────────────────────
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.set_name(HANDLER_PREFIX + "console")
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    # ── Rotating file handler ─────────────────────────────────────────────────
    log_path = config.LOG_FILE
    log_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.handlers.RotatingFileHandler(
        filename=log_path,
        maxBytes=10 * 1024 * 1024,   # 10 MB
        backupCount=5,
        encoding="utf-8",
    )
    file_handler.set_name(HANDLER_PREFIX + "file")
    file_handler.setLevel(numeric_level)
    file_handler.setFormatter(formatter)
    root.addHandler(file_handler)

    # Font discovery logs at INFO
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    root.info("Logging initialised — level=%s, file=%s", level, log_path)
