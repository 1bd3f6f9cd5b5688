"""Platoon traces: what a simulation run records and what settlement consumes.

A trace is the documented JSON interface between ``simulate`` and ``settle``.
Decimals serialize as strings so values round-trip exactly:

.. code-block:: json

    {
      "format": "platoon-dsr-trace/1",
      "day_length": "78", "delta": "0.01", "eta": "10", "decimals": 2,
      "vehicle_speed": {"alice": "0.5"},
      "drivers": [{"driver_id": "alice", "rank": 5, "prev_day_rate": "0.12", ...}],
      "platoons": [{"platoon_id": "P1", "formed_at": "0", "dissolved_at": "38",
                    "segments": [{"length": 2, "distance": "5",
                                  "initiating_kind": "formation", "cars_delta": 0,
                                  "start_time": "0", "end_time": "10"}]}],
      "memberships": [{"driver_id": "alice", "platoon_id": "P1", "role": "leader",
                       "joined_at": "0", "left_at": "38",
                       "first_segment": 0, "last_segment": 2,
                       "terminal_kind": "leave"}],
      "out_platoon_distance": {"alice": "20"}
    }

Memberships reference segments by index range rather than by time so that
zero-duration segments attribute unambiguously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Mapping

from .domain import DriverProfile, as_decimal
from .errors import InvalidSegment, TraceError, UnknownDriver

TRACE_FORMAT = "platoon-dsr-trace/1"


class SegmentKind(str, Enum):
    """The maneuver that began a platoon state."""

    FORMATION = "formation"
    JOIN = "join"
    LEAVE = "leave"
    MERGE = "merge"
    SPLIT = "split"


#: Segment kinds paid through the join component of in-platoon earnings.
JOIN_PARTITION = frozenset({SegmentKind.FORMATION, SegmentKind.JOIN, SegmentKind.MERGE})
#: Segment kinds paid through the leave component.
LEAVE_PARTITION = frozenset({SegmentKind.LEAVE, SegmentKind.SPLIT})
#: Kinds whose cars_delta counts toward an episode's join total j.
JOIN_COUNTED = frozenset({SegmentKind.JOIN, SegmentKind.MERGE})
#: Kinds whose cars_delta counts toward an episode's leave total l.
LEAVE_COUNTED = frozenset({SegmentKind.LEAVE, SegmentKind.SPLIT})


class Role(str, Enum):
    LEADER = "leader"
    FOLLOWER = "follower"


class TerminalKind(str, Enum):
    """How an episode ended."""

    LEAVE = "leave"
    SPLIT = "split"
    MERGE_ABSORBED = "merge-absorbed"
    DAY_END = "day-end"


@dataclass(frozen=True)
class StateSegment:
    """One platoon state: constant composition over a stretch of road.

    ``cars_delta`` is how many vehicles the initiating event added (join,
    merge) or removed (leave, split); zero for formation.
    """

    length: int
    distance: Decimal
    initiating_kind: SegmentKind
    cars_delta: int
    start_time: Decimal
    end_time: Decimal

    def __post_init__(self):
        if self.length < 2:
            raise InvalidSegment(f"a platoon state needs >= 2 cars, got {self.length}")
        if self.distance < 0:
            raise InvalidSegment(f"segment distance must be >= 0, got {self.distance}")
        if self.cars_delta < 0:
            raise InvalidSegment(f"cars_delta must be >= 0, got {self.cars_delta}")
        if self.end_time < self.start_time:
            raise InvalidSegment("segment ends before it starts")

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "distance": str(self.distance),
            "initiating_kind": self.initiating_kind.value,
            "cars_delta": self.cars_delta,
            "start_time": str(self.start_time),
            "end_time": str(self.end_time),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "StateSegment":
        return cls(
            length=int(data["length"]),
            distance=as_decimal(data["distance"], "distance"),
            initiating_kind=SegmentKind(data["initiating_kind"]),
            cars_delta=int(data.get("cars_delta", 0)),
            start_time=as_decimal(data["start_time"], "start_time"),
            end_time=as_decimal(data["end_time"], "end_time"),
        )


@dataclass(frozen=True)
class PlatoonRecord:
    """A platoon's full life: ordered states from formation to dissolution."""

    platoon_id: str
    formed_at: Decimal
    dissolved_at: Decimal | None  # None: still on the road at day end
    segments: tuple[StateSegment, ...]

    def to_dict(self) -> dict:
        return {
            "platoon_id": self.platoon_id,
            "formed_at": str(self.formed_at),
            "dissolved_at": None if self.dissolved_at is None else str(self.dissolved_at),
            "segments": [s.to_dict() for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlatoonRecord":
        dissolved = data.get("dissolved_at")
        return cls(
            platoon_id=str(data["platoon_id"]),
            formed_at=as_decimal(data["formed_at"], "formed_at"),
            dissolved_at=None if dissolved is None else as_decimal(dissolved, "dissolved_at"),
            segments=tuple(StateSegment.from_dict(s) for s in data["segments"]),
        )


@dataclass(frozen=True)
class MembershipInterval:
    """One driver's contiguous stay in one platoon.

    ``first_segment``/``last_segment`` are inclusive indices into the
    platoon's segment list.
    """

    driver_id: str
    platoon_id: str
    role: Role
    joined_at: Decimal
    left_at: Decimal
    first_segment: int
    last_segment: int
    terminal_kind: TerminalKind

    def to_dict(self) -> dict:
        return {
            "driver_id": self.driver_id,
            "platoon_id": self.platoon_id,
            "role": self.role.value,
            "joined_at": str(self.joined_at),
            "left_at": str(self.left_at),
            "first_segment": self.first_segment,
            "last_segment": self.last_segment,
            "terminal_kind": self.terminal_kind.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MembershipInterval":
        return cls(
            driver_id=str(data["driver_id"]),
            platoon_id=str(data["platoon_id"]),
            role=Role(data["role"]),
            joined_at=as_decimal(data["joined_at"], "joined_at"),
            left_at=as_decimal(data["left_at"], "left_at"),
            first_segment=int(data["first_segment"]),
            last_segment=int(data["last_segment"]),
            terminal_kind=TerminalKind(data["terminal_kind"]),
        )


@dataclass(frozen=True)
class DriverEpisode:
    """A driver's settled view of one membership: segments plus j/l totals.

    ``join_count`` (j) and ``leave_count`` (l) are car-weighted: each join or
    merge segment in the episode's span contributes the cars it added, each
    leave or split segment the cars it removed.
    """

    platoon_id: str
    role: Role
    segments: tuple[StateSegment, ...]
    join_count: int
    leave_count: int
    d_in: Decimal
    terminal_kind: TerminalKind

    @classmethod
    def from_membership(cls, interval: MembershipInterval,
                        platoon: PlatoonRecord) -> "DriverEpisode":
        segments = platoon.segments[interval.first_segment:interval.last_segment + 1]
        join_count = sum(s.cars_delta for s in segments if s.initiating_kind in JOIN_COUNTED)
        leave_count = sum(s.cars_delta for s in segments if s.initiating_kind in LEAVE_COUNTED)
        d_in = sum((s.distance for s in segments), Decimal(0))
        return cls(
            platoon_id=platoon.platoon_id,
            role=interval.role,
            segments=segments,
            join_count=join_count,
            leave_count=leave_count,
            d_in=d_in,
            terminal_kind=interval.terminal_kind,
        )


@dataclass(frozen=True)
class PlatoonTrace:
    """Everything a simulated day produced, as settlement needs it."""

    day_length: Decimal
    vehicle_speed: Mapping[str, Decimal]
    delta: Decimal
    eta: Decimal
    decimals: int
    drivers: tuple[DriverProfile, ...]
    platoons: tuple[PlatoonRecord, ...]
    memberships: tuple[MembershipInterval, ...]
    out_platoon_distance: Mapping[str, Decimal]

    def driver(self, driver_id: str) -> DriverProfile:
        for profile in self.drivers:
            if profile.driver_id == driver_id:
                return profile
        raise UnknownDriver(driver_id)

    def platoon(self, platoon_id: str) -> PlatoonRecord:
        for record in self.platoons:
            if record.platoon_id == platoon_id:
                return record
        raise TraceError(f"trace references unknown platoon {platoon_id!r}")

    def to_dict(self) -> dict:
        return {
            "format": TRACE_FORMAT,
            "day_length": str(self.day_length),
            "delta": str(self.delta),
            "eta": str(self.eta),
            "decimals": self.decimals,
            "vehicle_speed": {d: str(s) for d, s in self.vehicle_speed.items()},
            "drivers": [d.to_dict() for d in self.drivers],
            "platoons": [p.to_dict() for p in self.platoons],
            "memberships": [m.to_dict() for m in self.memberships],
            "out_platoon_distance": {d: str(v) for d, v in self.out_platoon_distance.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlatoonTrace":
        if not isinstance(data, Mapping):
            raise TraceError("trace must be a JSON object")
        declared = data.get("format", TRACE_FORMAT)
        if declared != TRACE_FORMAT:
            raise TraceError(f"unsupported trace format {declared!r}")
        try:
            return cls(
                day_length=as_decimal(data["day_length"], "day_length"),
                vehicle_speed={str(k): as_decimal(v, f"speed of {k}")
                               for k, v in data["vehicle_speed"].items()},
                delta=as_decimal(data["delta"], "delta"),
                eta=as_decimal(data["eta"], "eta"),
                decimals=int(data["decimals"]),
                drivers=tuple(DriverProfile.from_dict(d) for d in data["drivers"]),
                platoons=tuple(PlatoonRecord.from_dict(p) for p in data["platoons"]),
                memberships=tuple(MembershipInterval.from_dict(m)
                                  for m in data["memberships"]),
                out_platoon_distance={str(k): as_decimal(v, f"d_out of {k}")
                                      for k, v in data["out_platoon_distance"].items()},
            )
        except (KeyError, ValueError, TypeError, InvalidSegment) as exc:
            raise TraceError(f"malformed trace: {exc}") from exc


def extract_episodes(trace: PlatoonTrace, driver_id: str) -> tuple[list[DriverEpisode], Decimal]:
    """A driver's episodes (one per contiguous membership) and out-platoon miles."""
    trace.driver(driver_id)  # raises UnknownDriver
    episodes = [
        DriverEpisode.from_membership(interval, trace.platoon(interval.platoon_id))
        for interval in trace.memberships
        if interval.driver_id == driver_id
    ]
    d_out = trace.out_platoon_distance.get(driver_id, Decimal(0))
    return episodes, d_out


def trace_to_json(trace: PlatoonTrace) -> str:
    return json.dumps(trace.to_dict(), indent=2) + "\n"


def load_trace(path: str | Path) -> PlatoonTrace:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceError(f"cannot read trace file: {exc}")
    try:
        data = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise TraceError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return PlatoonTrace.from_dict(data)


def dump_trace(trace: PlatoonTrace, path: str | Path):
    Path(path).write_text(trace_to_json(trace))
