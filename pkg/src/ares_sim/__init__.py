"""802.11 anti-jamming simulator and controller library."""

from .analytics import AnalyticInputs, JammerMoments, classify_link, pdr_threshold, t_adapt, t_fixed
from .config import ConfigError, ScenarioConfig, from_dict, load
from .engine import SimResult, route_throughput, run
from .phy import DEFAULT_RATE_TABLE, RateTable
from .rate_control import DwellProfile

__version__ = "0.1.0"

__all__ = [
    "AnalyticInputs",
    "ConfigError",
    "DEFAULT_RATE_TABLE",
    "DwellProfile",
    "JammerMoments",
    "RateTable",
    "ScenarioConfig",
    "SimResult",
    "classify_link",
    "from_dict",
    "load",
    "pdr_threshold",
    "route_throughput",
    "run",
    "t_adapt",
    "t_fixed",
]
