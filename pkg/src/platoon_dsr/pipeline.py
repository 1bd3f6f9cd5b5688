"""Glue between the simulator, the settlement engine, and the ledger."""

from __future__ import annotations

from datetime import date as Date
from decimal import Decimal

from .chain import Block, DriverRecord
from .domain import DriverProfile, TokenAmount, tokens_from_earnings
from .earnings import Settlement, settle_day
from .errors import DecimalsMismatch, DuplicateRecord, InsufficientBalance
from .ledger import DRIVER_RECORD, Ledger, timestamp_for_date
from .trace import PlatoonTrace, Role, extract_episodes


def build_driver_record(trace: PlatoonTrace, driver: DriverProfile,
                        settlement: Settlement) -> DriverRecord:
    """Assemble the on-chain attribute bundle for one settled driver-day."""
    episodes, d_out = extract_episodes(trace, driver.driver_id)
    d_in_total = sum((e.d_in for e in episodes), Decimal(0))
    return DriverRecord(
        driver_id=driver.driver_id,
        current_earnings=settlement.er_total,
        rank=driver.rank,
        over_speed_count=driver.over_speed_count,
        distance_travelled=d_out + d_in_total,
        sharp_accel_count=driver.sharp_accel_count,
        sharp_decel_count=driver.sharp_decel_count,
        platoons_joined=settlement.episode_count,
        leader_activity=any(e.role == Role.LEADER for e in episodes),
        earning_date=settlement.earning_date,
    )


def required_funding(settlements: list[Settlement], decimals: int) -> TokenAmount:
    total = TokenAmount(0, decimals)
    for settlement in settlements:
        total = total + tokens_from_earnings(settlement.er_total, decimals)
    return total


def settle_trace_to_ledger(trace: PlatoonTrace, ledger: Ledger,
                           earning_date: Date) -> tuple[list[Settlement], Block | None]:
    """Settle every driver in the trace and commit one block of credits.

    An empty trace commits nothing. Raises DuplicateRecord if any driver
    already has a record for the date, InsufficientBalance if the
    driver-record account cannot cover the quantized total.
    """
    if trace.decimals != ledger.decimals:
        raise DecimalsMismatch(
            f"trace quantizes at {trace.decimals} decimals, "
            f"ledger at {ledger.decimals}")
    settlements = settle_day(trace, earning_date)
    if not settlements:
        return [], None

    for settlement in settlements:
        if ledger.has_record(settlement.driver_id, earning_date):
            raise DuplicateRecord(
                f"record for {settlement.driver_id!r} on "
                f"{earning_date.isoformat()} already stored")

    required = required_funding(settlements, ledger.decimals)
    available = ledger.balance_of(DRIVER_RECORD)
    if required > available:
        shortfall = TokenAmount(required.base_units - available.base_units,
                                required.decimals)
        raise InsufficientBalance(
            f"driver-record holds {available} tokens, settlement needs "
            f"{required}; top up at least {shortfall}")

    transactions = []
    for settlement in settlements:
        record = build_driver_record(
            trace, trace.driver(settlement.driver_id), settlement)
        transactions.extend(ledger.credit_driver(
            DRIVER_RECORD, settlement.driver_id, settlement, record))
    block = ledger.append_block(transactions, timestamp_for_date(earning_date))
    return settlements, block


def build_run_report(settlements: list[Settlement], *,
                     earning_date: Date,
                     decimals: int,
                     block: Block | None = None,
                     verified: bool | None = None,
                     scenario_path: str | None = None,
                     trace_path: str | None = None,
                     ledger_path: str | None = None) -> dict:
    """The machine-readable settlement run report."""
    er_total = sum((s.er_total for s in settlements), Decimal(0))
    credited = required_funding(settlements, decimals)
    report = {
        "date": earning_date.isoformat(),
        "scenario": scenario_path,
        "trace": trace_path,
        "settlements": [s.to_dict() for s in settlements],
        "totals": {
            "drivers": len(settlements),
            "er_total": str(er_total),
            "credited_base_units": credited.base_units,
            "credited_tokens": str(credited),
        },
        "ledger": {
            "path": ledger_path,
            "block_range": None if block is None else [block.index, block.index],
            "verified": verified,
        },
    }
    return report
