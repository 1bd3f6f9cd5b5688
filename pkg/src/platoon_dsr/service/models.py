"""Request and response schemas for the service API.

Decimal fields accept JSON numbers or strings and always serialize back as
strings, so amounts survive the wire bit for bit.
"""

from __future__ import annotations

from datetime import date as Date
from decimal import Decimal
from typing import Literal

from pydantic import BaseModel, Field

from ..ledger import DEFAULT_SUPPLY_TOKENS
from ..trace import TRACE_FORMAT

EPOCH = Date(1970, 1, 1)


class DriverModel(BaseModel):
    driver_id: str
    rank: int
    prev_day_rate: Decimal | None = None
    over_speed_count: int = 0
    sharp_accel_count: int = 0
    sharp_decel_count: int = 0


class InitialPlatoonModel(BaseModel):
    leader: str
    followers: list[str] = Field(default_factory=list)


class EventModel(BaseModel):
    time: Decimal
    kind: Literal["join", "leave", "merge", "split"]
    vehicle: str | None = None
    platoon: str | None = None
    platoon_a: str | None = None
    platoon_b: str | None = None
    index: int | None = None


class ScenarioModel(BaseModel):
    day_length: Decimal
    vehicle_speed: Decimal | dict[str, Decimal]
    delta: Decimal | None = None
    eta: Decimal | None = None
    decimals: int | None = None
    seed: int | None = None
    rate_table: dict[str, Decimal] | None = None
    drivers: list[DriverModel]
    initial_platoons: list[InitialPlatoonModel] = Field(default_factory=list)
    events: list[EventModel] = Field(default_factory=list)


class TraceDriverModel(BaseModel):
    driver_id: str
    rank: int
    prev_day_rate: Decimal
    over_speed_count: int = 0
    sharp_accel_count: int = 0
    sharp_decel_count: int = 0


class SegmentModel(BaseModel):
    length: int
    distance: Decimal
    initiating_kind: Literal["formation", "join", "leave", "merge", "split"]
    cars_delta: int = 0
    start_time: Decimal
    end_time: Decimal


class PlatoonModel(BaseModel):
    platoon_id: str
    formed_at: Decimal
    dissolved_at: Decimal | None = None
    segments: list[SegmentModel]


class MembershipModel(BaseModel):
    driver_id: str
    platoon_id: str
    role: Literal["leader", "follower"]
    joined_at: Decimal
    left_at: Decimal
    first_segment: int
    last_segment: int
    terminal_kind: Literal["leave", "split", "merge-absorbed", "day-end"]


class TraceModel(BaseModel):
    format: str = TRACE_FORMAT
    day_length: Decimal
    delta: Decimal
    eta: Decimal
    decimals: int
    vehicle_speed: dict[str, Decimal]
    drivers: list[TraceDriverModel]
    platoons: list[PlatoonModel]
    memberships: list[MembershipModel]
    out_platoon_distance: dict[str, Decimal]


class SimulateResponse(BaseModel):
    trace: TraceModel


class SettleRequest(BaseModel):
    trace: TraceModel
    date: Date


class EpisodeBreakdownModel(BaseModel):
    platoon_id: str
    role: str
    join_part: Decimal
    leave_part: Decimal
    penalty: Decimal
    d_in: Decimal
    join_count: int
    leave_count: int


class SettlementModel(BaseModel):
    driver_id: str
    earning_date: Date
    er_join: Decimal
    er_leave: Decimal
    er_in: Decimal
    er_out: Decimal
    er_total: Decimal
    penalty_total: Decimal
    episode_count: int
    episodes: list[EpisodeBreakdownModel]


class TotalsModel(BaseModel):
    drivers: int
    er_total: Decimal
    credited_base_units: int
    credited_tokens: Decimal


class LedgerInfoModel(BaseModel):
    path: str | None = None
    block_range: list[int] | None = None
    verified: bool | None = None


class RunReportModel(BaseModel):
    date: Date
    scenario: str | None = None
    trace: str | None = None
    settlements: list[SettlementModel]
    totals: TotalsModel
    ledger: LedgerInfoModel


class LedgerInitRequest(BaseModel):
    supply_tokens: Decimal = Decimal(DEFAULT_SUPPLY_TOKENS)
    decimals: int = 2
    date: Date = EPOCH


class LedgerInitResponse(BaseModel):
    height: int
    total_supply: Decimal
    authority_balance: Decimal
    driver_record_allowance: Decimal


class FundRequest(BaseModel):
    amount_tokens: Decimal
    date: Date = EPOCH


class FundResponse(BaseModel):
    height: int
    authority_balance: Decimal
    driver_record_balance: Decimal


class BalanceResponse(BaseModel):
    account: str
    base_units: int
    decimals: int
    tokens: Decimal


class DriverRecordModel(BaseModel):
    driver_id: str
    current_earnings: Decimal
    rank: int
    over_speed_count: int
    distance_travelled: Decimal
    sharp_accel_count: int
    sharp_decel_count: int
    platoons_joined: int
    leader_activity: bool
    earning_date: Date


class RecordsResponse(BaseModel):
    driver_id: str
    records: list[DriverRecordModel]


class VerifyResponse(BaseModel):
    ok: bool
    blocks: int | None = None
    block_index: int | None = None
    field: str | None = None
    detail: str | None = None


class ErrorBody(BaseModel):
    type: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody
