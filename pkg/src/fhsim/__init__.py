"""System-level simulator of a shared, capacity-limited fronthaul in a multi-cell TDD RAN."""

from .config import (ConfigError, DlStrategy, SimConfig, SrsMode, SrsTransferShape,
                     load_config)
from .engine import run

__all__ = ["ConfigError", "DlStrategy", "SimConfig", "SrsMode", "SrsTransferShape",
           "load_config", "run"]
__version__ = "0.1.0"
