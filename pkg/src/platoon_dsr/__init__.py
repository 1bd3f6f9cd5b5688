"""Platoon lifecycle simulation, driver earnings settlement, and DSR token ledger."""

from .domain import (
    DriverProfile,
    EarningRateTable,
    Rank,
    TokenAmount,
    leader_eligible,
    tokens_from_earnings,
)
from .earnings import Settlement, daily_settlement, settle_day
from .ledger import AUTHORITY, DRIVER_RECORD, CorruptionReport, Ledger, verify_file
from .scenario import ScenarioSpec, load_scenario, scenario_from_dict
from .simulation import apply_event, initial_state, run
from .trace import DriverEpisode, PlatoonTrace, extract_episodes, load_trace

__version__ = "0.1.0"

__all__ = [
    "AUTHORITY",
    "CorruptionReport",
    "DRIVER_RECORD",
    "DriverEpisode",
    "DriverProfile",
    "EarningRateTable",
    "Ledger",
    "PlatoonTrace",
    "Rank",
    "ScenarioSpec",
    "Settlement",
    "TokenAmount",
    "apply_event",
    "daily_settlement",
    "extract_episodes",
    "initial_state",
    "leader_eligible",
    "load_scenario",
    "load_trace",
    "run",
    "scenario_from_dict",
    "settle_day",
    "tokens_from_earnings",
    "verify_file",
]
