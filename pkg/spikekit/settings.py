"""Environment-driven settings.

Every knob has a typed default so nothing needs to be exported for a normal run:

    export SPIKEKIT_THREADS=4          # cap on concurrent seed runs (default: 1)
    export SPIKEKIT_OUTPUT_DIR=out     # default: validation/results
    export SPIKEKIT_E_AC_PJ=0.9        # energy per accumulate, picojoules
    export SPIKEKIT_E_MAC_PJ=4.6       # energy per multiply-accumulate, picojoules
    export SPIKEKIT_LOG_LEVEL=INFO     # default: WARNING
    export SPIKEKIT_CHECKPOINT_EVERY=5 # epochs between checkpoints (0 = final only)
"""

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


def _env_int(name, default):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None


def _env_float(name, default):
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from None


@dataclass(frozen=True)
class Settings:
    threads: int = 1
    output_dir: Path = Path("validation/results")
    e_ac_pj: float = 0.9
    e_mac_pj: float = 4.6
    log_level: str = "WARNING"
    checkpoint_every: int = 0

    @classmethod
    def from_env(cls):
        settings = cls(
            threads=_env_int("SPIKEKIT_THREADS", 1),
            output_dir=Path(os.getenv("SPIKEKIT_OUTPUT_DIR", "validation/results")),
            e_ac_pj=_env_float("SPIKEKIT_E_AC_PJ", 0.9),
            e_mac_pj=_env_float("SPIKEKIT_E_MAC_PJ", 4.6),
            log_level=os.getenv("SPIKEKIT_LOG_LEVEL", "WARNING").upper(),
            checkpoint_every=_env_int("SPIKEKIT_CHECKPOINT_EVERY", 0),
        )
        if settings.threads < 1:
            raise ConfigError("SPIKEKIT_THREADS must be >= 1")
        if settings.e_ac_pj < 0 or settings.e_mac_pj < 0:
            raise ConfigError("energy constants must be non-negative")
        return settings
