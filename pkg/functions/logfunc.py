from __future__ import annotations

import logging
import sys

import colorlog

import config

_FMT = "%(log_color)s%(asctime)s %(levelname)-7s%(reset)s %(name)s %(message)s"
_PLAIN_FMT = "%(asctime)s %(levelname)-7s %(name)s %(message)s"


def setup_logging(level: str | None = None, color: bool | None = None) -> None:
    """Install one stderr handler on the root logger (idempotent)."""
    level = (level or config.LOG_LEVEL).upper()
    color = config.LOG_COLOR if color is None else color
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_satbench", False):
            root.removeHandler(h)

    handler = logging.StreamHandler(sys.stderr)
    if color:
        handler.setFormatter(colorlog.ColoredFormatter(_FMT, datefmt="%H:%M:%S"))
    else:
        handler.setFormatter(logging.Formatter(_PLAIN_FMT, datefmt="%H:%M:%S"))
    handler._satbench = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)
