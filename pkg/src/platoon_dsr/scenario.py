"""Scenario files: the scripted day a simulation run executes.

The JSON schema mirrors :class:`ScenarioSpec` field for field:

.. code-block:: json

    {
      "day_length": 78,
      "vehicle_speed": 0.5,
      "delta": 0.01,
      "eta": 10,
      "decimals": 2,
      "seed": 42,
      "rate_table": {"1": 0.01, "2": 0.03, "3": 0.09, "4": 0.12, "5": 0.15},
      "drivers": [{"driver_id": "alice", "rank": 5, "prev_day_rate": 0.12}],
      "initial_platoons": [{"leader": "alice", "followers": ["carol"]}],
      "events": [
        {"time": 10, "kind": "join", "vehicle": "bella", "platoon": "P1"},
        {"time": 30, "kind": "leave", "vehicle": "bella"},
        {"time": 50, "kind": "merge", "platoon_a": "P1", "platoon_b": "P2"},
        {"time": 60, "kind": "split", "platoon": "P1", "index": 2}
      ]
    }

Numbers may be given as JSON numbers or strings; both parse to exact
decimals. ``vehicle_speed`` is either one constant for every vehicle or a
per-driver map. ``prev_day_rate`` defaults to the rate table entry for the
driver's rank. Initial platoons are named ``P1``, ``P2``, ... in listed
order; each split allocates the next two ids (left side first), so event
scripts can reference platoons created mid-day.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Mapping, Sequence, Union

from .domain import (
    DEFAULT_DECIMALS,
    DEFAULT_DELTA,
    DEFAULT_ETA,
    DriverProfile,
    EarningRateTable,
    Rank,
    as_decimal,
)
from .errors import ScenarioError


@dataclass(frozen=True)
class JoinEvent:
    """One solo vehicle joins the tail of an existing platoon."""
    time: Decimal
    vehicle_id: str
    platoon_id: str

    kind = "join"

    def to_dict(self) -> dict:
        return {"time": str(self.time), "kind": "join",
                "vehicle": self.vehicle_id, "platoon": self.platoon_id}


@dataclass(frozen=True)
class LeaveEvent:
    """A follower exits its platoon; remaining vehicles close ranks."""
    time: Decimal
    vehicle_id: str

    kind = "leave"

    def to_dict(self) -> dict:
        return {"time": str(self.time), "kind": "leave", "vehicle": self.vehicle_id}


@dataclass(frozen=True)
class MergeEvent:
    """Platoon B's vehicles are appended behind platoon A; A's leader stays."""
    time: Decimal
    platoon_a: str
    platoon_b: str

    kind = "merge"

    def to_dict(self) -> dict:
        return {"time": str(self.time), "kind": "merge",
                "platoon_a": self.platoon_a, "platoon_b": self.platoon_b}


@dataclass(frozen=True)
class SplitEvent:
    """A platoon divides: vehicles [:index] and [index:] go separate ways."""
    time: Decimal
    platoon_id: str
    split_index: int

    kind = "split"

    def to_dict(self) -> dict:
        return {"time": str(self.time), "kind": "split",
                "platoon": self.platoon_id, "index": self.split_index}


ManeuverEvent = Union[JoinEvent, LeaveEvent, MergeEvent, SplitEvent]


@dataclass(frozen=True)
class InitialPlatoon:
    leader_id: str
    follower_ids: tuple[str, ...]

    @property
    def member_ids(self) -> tuple[str, ...]:
        return (self.leader_id, *self.follower_ids)

    def to_dict(self) -> dict:
        return {"leader": self.leader_id, "followers": list(self.follower_ids)}


@dataclass(frozen=True)
class ScenarioSpec:
    """A validated scenario: drivers, initial platoons, and scripted events."""

    drivers: tuple[DriverProfile, ...]
    day_length: Decimal
    vehicle_speed: Mapping[str, Decimal]
    initial_platoons: tuple[InitialPlatoon, ...]
    events: tuple[ManeuverEvent, ...]
    rate_table: EarningRateTable
    delta: Decimal = DEFAULT_DELTA
    eta: Decimal = DEFAULT_ETA
    decimals: int = DEFAULT_DECIMALS
    seed: int = 0

    def __post_init__(self):
        _validate_scenario(self)

    def driver(self, driver_id: str) -> DriverProfile:
        for profile in self.drivers:
            if profile.driver_id == driver_id:
                return profile
        raise KeyError(driver_id)

    def speed_of(self, driver_id: str) -> Decimal:
        return self.vehicle_speed[driver_id]

    def to_dict(self) -> dict:
        return {
            "day_length": str(self.day_length),
            "vehicle_speed": {d: str(s) for d, s in self.vehicle_speed.items()},
            "delta": str(self.delta),
            "eta": str(self.eta),
            "decimals": self.decimals,
            "seed": self.seed,
            "rate_table": self.rate_table.to_dict(),
            "drivers": [d.to_dict() for d in self.drivers],
            "initial_platoons": [p.to_dict() for p in self.initial_platoons],
            "events": [e.to_dict() for e in self.events],
        }


def _validate_scenario(spec: ScenarioSpec):
    if spec.day_length <= 0:
        raise ScenarioError(f"day_length must be > 0, got {spec.day_length}", "day_length")
    if spec.delta <= 0:
        raise ScenarioError(f"delta must be > 0, got {spec.delta}", "delta")
    if spec.eta <= 0:
        raise ScenarioError(f"eta must be > 0, got {spec.eta}", "eta")
    if not isinstance(spec.decimals, int) or spec.decimals < 0:
        raise ScenarioError(f"decimals must be a non-negative integer", "decimals")

    ids = [d.driver_id for d in spec.drivers]
    known = set(ids)
    if len(known) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ScenarioError(f"duplicate driver ids: {dupes}", "drivers")

    if set(spec.vehicle_speed) != known:
        missing = sorted(known - set(spec.vehicle_speed))
        extra = sorted(set(spec.vehicle_speed) - known)
        detail = []
        if missing:
            detail.append(f"missing speeds for {missing}")
        if extra:
            detail.append(f"speeds for unknown vehicles {extra}")
        raise ScenarioError("; ".join(detail), "vehicle_speed")
    for driver_id, speed in spec.vehicle_speed.items():
        if speed <= 0:
            raise ScenarioError(f"speed for {driver_id} must be > 0, got {speed}",
                                "vehicle_speed")

    seen_members: set[str] = set()
    for i, platoon in enumerate(spec.initial_platoons):
        members = platoon.member_ids
        if len(members) < 2:
            raise ScenarioError("a platoon needs at least 2 vehicles",
                                f"initial_platoons/{i}")
        for member in members:
            if member not in known:
                raise ScenarioError(f"unknown vehicle {member!r}",
                                    f"initial_platoons/{i}")
            if member in seen_members:
                raise ScenarioError(f"vehicle {member!r} is in two initial platoons",
                                    f"initial_platoons/{i}")
            seen_members.add(member)

    last_time = None
    for i, event in enumerate(spec.events):
        where = f"events/{i}"
        if event.time < 0 or event.time > spec.day_length:
            raise ScenarioError(
                f"time {event.time} outside [0, {spec.day_length}]", f"{where}/time")
        if last_time is not None and event.time <= last_time:
            raise ScenarioError(
                f"event times must strictly increase ({event.time} after {last_time})",
                f"{where}/time")
        last_time = event.time
        for vehicle in _event_vehicles(event):
            if vehicle not in known:
                raise ScenarioError(f"unknown vehicle {vehicle!r}", where)
        if isinstance(event, SplitEvent) and event.split_index < 1:
            raise ScenarioError("split index must be >= 1", f"{where}/index")


def _event_vehicles(event: ManeuverEvent) -> tuple[str, ...]:
    if isinstance(event, (JoinEvent, LeaveEvent)):
        return (event.vehicle_id,)
    return ()


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise ScenarioError(f"missing required field {key!r}", where)
    return data[key]


def _parse_event(data: Mapping, index: int) -> ManeuverEvent:
    where = f"events/{index}"
    if not isinstance(data, Mapping):
        raise ScenarioError("event must be an object", where)
    kind = _require(data, "kind", where)
    try:
        time = as_decimal(_require(data, "time", where), "time")
    except ValueError as exc:
        raise ScenarioError(str(exc), f"{where}/time")
    if kind == "join":
        return JoinEvent(time, str(_require(data, "vehicle", where)),
                         str(_require(data, "platoon", where)))
    if kind == "leave":
        return LeaveEvent(time, str(_require(data, "vehicle", where)))
    if kind == "merge":
        return MergeEvent(time, str(_require(data, "platoon_a", where)),
                          str(_require(data, "platoon_b", where)))
    if kind == "split":
        index_raw = _require(data, "index", where)
        if not isinstance(index_raw, int) or isinstance(index_raw, bool):
            raise ScenarioError("split index must be an integer", f"{where}/index")
        return SplitEvent(time, str(_require(data, "platoon", where)), index_raw)
    raise ScenarioError(f"unknown event kind {kind!r}", f"{where}/kind")


def scenario_from_dict(data: Mapping) -> ScenarioSpec:
    """Build and validate a ScenarioSpec from parsed JSON data."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a JSON object")

    try:
        rate_table = (EarningRateTable({int(k): as_decimal(v, f"rate {k}")
                                        for k, v in data["rate_table"].items()})
                      if "rate_table" in data else EarningRateTable.default())
    except (ValueError, AttributeError) as exc:
        raise ScenarioError(str(exc), "rate_table")

    drivers = []
    raw_drivers = _require(data, "drivers", "")
    if not isinstance(raw_drivers, Sequence) or isinstance(raw_drivers, (str, bytes)):
        raise ScenarioError("drivers must be a list", "drivers")
    for i, raw in enumerate(raw_drivers):
        where = f"drivers/{i}"
        try:
            rank = Rank(_require(raw, "rank", where))
            rate = (as_decimal(raw["prev_day_rate"], "prev_day_rate")
                    if "prev_day_rate" in raw else rate_table.rate_for(rank))
            drivers.append(DriverProfile(
                driver_id=str(_require(raw, "driver_id", where)),
                rank=rank,
                prev_day_rate=rate,
                over_speed_count=int(raw.get("over_speed_count", 0)),
                sharp_accel_count=int(raw.get("sharp_accel_count", 0)),
                sharp_decel_count=int(raw.get("sharp_decel_count", 0)),
            ))
        except ScenarioError:
            raise
        except (ValueError, TypeError) as exc:
            raise ScenarioError(str(exc), where)

    try:
        day_length = as_decimal(_require(data, "day_length", ""), "day_length")
    except ValueError as exc:
        raise ScenarioError(str(exc), "day_length")

    raw_speed = _require(data, "vehicle_speed", "")
    try:
        if isinstance(raw_speed, Mapping):
            speeds = {str(k): as_decimal(v, f"speed of {k}") for k, v in raw_speed.items()}
        else:
            shared = as_decimal(raw_speed, "vehicle_speed")
            speeds = {d.driver_id: shared for d in drivers}
    except ValueError as exc:
        raise ScenarioError(str(exc), "vehicle_speed")

    platoons = []
    for i, raw in enumerate(data.get("initial_platoons", [])):
        where = f"initial_platoons/{i}"
        if not isinstance(raw, Mapping):
            raise ScenarioError("initial platoon must be an object", where)
        followers = raw.get("followers", [])
        if not isinstance(followers, Sequence) or isinstance(followers, (str, bytes)):
            raise ScenarioError("followers must be a list", f"{where}/followers")
        platoons.append(InitialPlatoon(
            leader_id=str(_require(raw, "leader", where)),
            follower_ids=tuple(str(f) for f in followers),
        ))

    events = tuple(_parse_event(raw, i) for i, raw in enumerate(data.get("events", [])))

    try:
        delta = as_decimal(data.get("delta", DEFAULT_DELTA), "delta")
        eta = as_decimal(data.get("eta", DEFAULT_ETA), "eta")
    except ValueError as exc:
        raise ScenarioError(str(exc))

    decimals = data.get("decimals", DEFAULT_DECIMALS)
    if not isinstance(decimals, int) or isinstance(decimals, bool) or decimals < 0:
        raise ScenarioError("decimals must be a non-negative integer", "decimals")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError("seed must be an integer", "seed")

    return ScenarioSpec(
        drivers=tuple(drivers),
        day_length=day_length,
        vehicle_speed=speeds,
        initial_platoons=tuple(platoons),
        events=events,
        rate_table=rate_table,
        delta=delta,
        eta=eta,
        decimals=decimals,
        seed=seed,
    )


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Parse and validate a scenario file.

    Raises ScenarioError with line/column detail on malformed JSON and with a
    field pointer on schema violations.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}")
    try:
        data = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return scenario_from_dict(data)


def dump_scenario(spec: ScenarioSpec, path: str | Path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
