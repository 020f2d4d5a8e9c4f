"""Simulation of a pilot-tone assisted continuous-variable QKD link.

Submodules follow the signal path: :mod:`~pilotqkd.txsim` (transmitter),
:mod:`~pilotqkd.channel` (fiber), :mod:`~pilotqkd.rxsim` (intradyne
receiver), :mod:`~pilotqkd.dsp` (carrier and symbol recovery) and
:mod:`~pilotqkd.security` (estimation and key rate).
"""

from .config import ScenarioConfig, load_config, parse_config_text
from .errors import (
    CalibrationError,
    ConfigError,
    LockError,
    PilotQKDError,
    StageError,
    UnphysicalStateError,
)
from .pipeline import LinkResult, run_scenario, run_sweep, simulate_link
from .presets import PRESETS, ScenarioPreset, get_preset
from .security import KeyRateParams, secure_key_rate

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "CalibrationError",
    "ConfigError",
    "KeyRateParams",
    "LinkResult",
    "LockError",
    "PilotQKDError",
    "ScenarioConfig",
    "ScenarioPreset",
    "StageError",
    "UnphysicalStateError",
    "get_preset",
    "load_config",
    "parse_config_text",
    "run_scenario",
    "run_sweep",
    "secure_key_rate",
    "simulate_link",
]
