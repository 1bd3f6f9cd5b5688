"""Deterministic platoon lifecycle simulator on a 1-D roadway.

Events are scripted, vehicles move at constant speed, and a platoon accrues
distance at its leader's speed (the leader is in charge of speed; followers
track it). Between events nothing changes composition, so each platoon's
life is a sequence of constant-composition states; every event closes the
current state and opens the next one tagged with the maneuver that caused
it. Identical scenarios produce identical traces: there is no wall clock
and no randomness in event application (the scenario ``seed`` exists for
test-side scenario generation only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, localcontext

from .domain import CALC_CONTEXT, leader_eligible
from .errors import InfeasibleEvent, IneligibleLeader
from .scenario import (
    JoinEvent,
    LeaveEvent,
    ManeuverEvent,
    MergeEvent,
    ScenarioSpec,
    SplitEvent,
)
from .trace import (
    MembershipInterval,
    PlatoonRecord,
    PlatoonTrace,
    Role,
    SegmentKind,
    StateSegment,
    TerminalKind,
)


@dataclass
class _PendingSegment:
    open_time: Decimal
    kind: SegmentKind
    cars_delta: int
    length: int


@dataclass
class _ActivePlatoon:
    platoon_id: str
    vehicles: list[str]            # vehicles[0] is the leader
    leader_speed: Decimal
    formed_at: Decimal
    segments: list[StateSegment] = field(default_factory=list)
    pending: _PendingSegment | None = None
    # driver -> (joined_at, first_segment_index, role)
    entries: dict[str, tuple[Decimal, int, Role]] = field(default_factory=dict)

    @property
    def leader(self) -> str:
        return self.vehicles[0]

    def open_segment(self, time: Decimal, kind: SegmentKind, cars_delta: int):
        self.pending = _PendingSegment(time, kind, cars_delta, len(self.vehicles))

    def close_segment(self, time: Decimal):
        pending = self.pending
        with localcontext(CALC_CONTEXT):
            distance = self.leader_speed * (time - pending.open_time)
        self.segments.append(StateSegment(
            length=pending.length,
            distance=distance,
            initiating_kind=pending.kind,
            cars_delta=pending.cars_delta,
            start_time=pending.open_time,
            end_time=time,
        ))
        self.pending = None


@dataclass
class WorldState:
    """Mutable simulation state; advance it with :func:`apply_event`."""

    scenario: ScenarioSpec
    now: Decimal
    platoons: dict[str, _ActivePlatoon]
    member_of: dict[str, str]
    solo_since: dict[str, Decimal]
    solo_time: dict[str, Decimal]
    completed: list[PlatoonRecord]
    memberships: list[MembershipInterval]
    next_platoon_number: int
    platoon_order: list[str]  # creation order of every platoon id


def _speed(state: WorldState, driver_id: str) -> Decimal:
    speed = state.scenario.vehicle_speed.get(driver_id)
    if speed is None:
        raise InfeasibleEvent(f"unknown vehicle {driver_id!r}")
    return speed


def initial_state(scenario: ScenarioSpec) -> WorldState:
    """Form the initial platoons at t=0; everyone else starts solo."""
    zero = Decimal(0)
    state = WorldState(
        scenario=scenario,
        now=zero,
        platoons={},
        member_of={},
        solo_since={},
        solo_time={d.driver_id: zero for d in scenario.drivers},
        completed=[],
        memberships=[],
        next_platoon_number=len(scenario.initial_platoons) + 1,
        platoon_order=[],
    )
    for driver in scenario.drivers:
        state.solo_since[driver.driver_id] = zero

    for number, initial in enumerate(scenario.initial_platoons, start=1):
        leader_profile = scenario.driver(initial.leader_id)
        if not leader_eligible(leader_profile.rank):
            raise IneligibleLeader(
                f"{initial.leader_id} (rank {int(leader_profile.rank)}) "
                f"cannot lead a platoon"
            )
        platoon = _ActivePlatoon(
            platoon_id=f"P{number}",
            vehicles=list(initial.member_ids),
            leader_speed=_speed(state, initial.leader_id),
            formed_at=zero,
        )
        platoon.open_segment(zero, SegmentKind.FORMATION, 0)
        for position, vehicle in enumerate(platoon.vehicles):
            role = Role.LEADER if position == 0 else Role.FOLLOWER
            platoon.entries[vehicle] = (zero, 0, role)
            state.member_of[vehicle] = platoon.platoon_id
            del state.solo_since[vehicle]
        state.platoons[platoon.platoon_id] = platoon
        state.platoon_order.append(platoon.platoon_id)
    return state


def _end_membership(state: WorldState, platoon: _ActivePlatoon, vehicle: str,
                    time: Decimal, terminal: TerminalKind):
    joined_at, first_segment, role = platoon.entries.pop(vehicle)
    state.memberships.append(MembershipInterval(
        driver_id=vehicle,
        platoon_id=platoon.platoon_id,
        role=role,
        joined_at=joined_at,
        left_at=time,
        first_segment=first_segment,
        last_segment=len(platoon.segments) - 1,
        terminal_kind=terminal,
    ))
    del state.member_of[vehicle]


def _go_solo(state: WorldState, vehicle: str, time: Decimal):
    state.solo_since[vehicle] = time


def _leave_solo(state: WorldState, vehicle: str, time: Decimal):
    since = state.solo_since.pop(vehicle)
    state.solo_time[vehicle] += time - since


def _complete(state: WorldState, platoon: _ActivePlatoon, dissolved_at: Decimal | None):
    state.completed.append(PlatoonRecord(
        platoon_id=platoon.platoon_id,
        formed_at=platoon.formed_at,
        dissolved_at=dissolved_at,
        segments=tuple(platoon.segments),
    ))
    del state.platoons[platoon.platoon_id]


def _require_platoon(state: WorldState, platoon_id: str) -> _ActivePlatoon:
    platoon = state.platoons.get(platoon_id)
    if platoon is None:
        raise InfeasibleEvent(f"no active platoon {platoon_id!r}")
    return platoon


def _apply_join(state: WorldState, event: JoinEvent):
    platoon = _require_platoon(state, event.platoon_id)
    _speed(state, event.vehicle_id)
    if event.vehicle_id in state.member_of:
        raise InfeasibleEvent(
            f"{event.vehicle_id} is already in platoon {state.member_of[event.vehicle_id]}"
        )
    platoon.close_segment(event.time)
    _leave_solo(state, event.vehicle_id, event.time)
    platoon.vehicles.append(event.vehicle_id)
    platoon.entries[event.vehicle_id] = (event.time, len(platoon.segments), Role.FOLLOWER)
    state.member_of[event.vehicle_id] = platoon.platoon_id
    platoon.open_segment(event.time, SegmentKind.JOIN, 1)


def _apply_leave(state: WorldState, event: LeaveEvent):
    platoon_id = state.member_of.get(event.vehicle_id)
    if platoon_id is None:
        raise InfeasibleEvent(f"{event.vehicle_id} is not in a platoon")
    platoon = state.platoons[platoon_id]
    if platoon.leader == event.vehicle_id:
        raise InfeasibleEvent(
            f"{event.vehicle_id} leads {platoon_id} and cannot leave; split instead"
        )
    platoon.close_segment(event.time)
    _end_membership(state, platoon, event.vehicle_id, event.time, TerminalKind.LEAVE)
    platoon.vehicles.remove(event.vehicle_id)
    _go_solo(state, event.vehicle_id, event.time)
    if len(platoon.vehicles) >= 2:
        platoon.open_segment(event.time, SegmentKind.LEAVE, 1)
    else:
        # a single car is not a platoon: dissolve, the survivor travels on solo
        survivor = platoon.vehicles[0]
        _end_membership(state, platoon, survivor, event.time, TerminalKind.LEAVE)
        _go_solo(state, survivor, event.time)
        _complete(state, platoon, event.time)


def _apply_merge(state: WorldState, event: MergeEvent):
    if event.platoon_a == event.platoon_b:
        raise InfeasibleEvent(f"cannot merge {event.platoon_a} with itself")
    survivor = _require_platoon(state, event.platoon_a)
    absorbed = _require_platoon(state, event.platoon_b)
    survivor.close_segment(event.time)
    absorbed.close_segment(event.time)
    for vehicle in absorbed.vehicles:
        _end_membership(state, absorbed, vehicle, event.time, TerminalKind.MERGE_ABSORBED)
    joining = list(absorbed.vehicles)
    _complete(state, absorbed, event.time)
    first_segment = len(survivor.segments)
    survivor.vehicles.extend(joining)
    for vehicle in joining:
        survivor.entries[vehicle] = (event.time, first_segment, Role.FOLLOWER)
        state.member_of[vehicle] = survivor.platoon_id
    survivor.open_segment(event.time, SegmentKind.MERGE, len(joining))


def _apply_split(state: WorldState, event: SplitEvent):
    platoon = _require_platoon(state, event.platoon_id)
    size = len(platoon.vehicles)
    if not 1 <= event.split_index <= size - 1:
        raise InfeasibleEvent(
            f"split index {event.split_index} must leave >= 1 vehicle on each side "
            f"of a {size}-car platoon"
        )
    sides = [platoon.vehicles[:event.split_index], platoon.vehicles[event.split_index:]]
    for side in sides:
        if len(side) >= 2:
            head = state.scenario.driver(side[0])
            if not leader_eligible(head.rank):
                raise IneligibleLeader(
                    f"{side[0]} (rank {int(head.rank)}) cannot lead the post-split platoon"
                )
    platoon.close_segment(event.time)
    for vehicle in list(platoon.vehicles):
        _end_membership(state, platoon, vehicle, event.time, TerminalKind.SPLIT)
    _complete(state, platoon, event.time)
    for side in sides:
        if len(side) == 1:
            _go_solo(state, side[0], event.time)
            continue
        number = state.next_platoon_number
        state.next_platoon_number += 1
        successor = _ActivePlatoon(
            platoon_id=f"P{number}",
            vehicles=list(side),
            leader_speed=_speed(state, side[0]),
            formed_at=event.time,
        )
        successor.open_segment(event.time, SegmentKind.SPLIT, size - len(side))
        for position, vehicle in enumerate(side):
            role = Role.LEADER if position == 0 else Role.FOLLOWER
            successor.entries[vehicle] = (event.time, 0, role)
            state.member_of[vehicle] = successor.platoon_id
        state.platoons[successor.platoon_id] = successor
        state.platoon_order.append(successor.platoon_id)


def apply_event(state: WorldState, event: ManeuverEvent) -> WorldState:
    """Apply one maneuver, closing and opening platoon states as needed."""
    if event.time < state.now:
        raise InfeasibleEvent(
            f"event at {event.time} arrives after the world reached {state.now}"
        )
    if event.time > state.scenario.day_length:
        raise InfeasibleEvent(f"event at {event.time} is past day end")
    if isinstance(event, JoinEvent):
        _apply_join(state, event)
    elif isinstance(event, LeaveEvent):
        _apply_leave(state, event)
    elif isinstance(event, MergeEvent):
        _apply_merge(state, event)
    elif isinstance(event, SplitEvent):
        _apply_split(state, event)
    else:
        raise InfeasibleEvent(f"unknown event type {type(event).__name__}")
    state.now = event.time
    return state


def finalize(state: WorldState) -> PlatoonTrace:
    """Close out the day and assemble the trace."""
    end = state.scenario.day_length
    for platoon_id in list(state.platoons):
        platoon = state.platoons[platoon_id]
        platoon.close_segment(end)
        for vehicle in list(platoon.vehicles):
            _end_membership(state, platoon, vehicle, end, TerminalKind.DAY_END)
        _complete(state, platoon, None)
    for vehicle in list(state.solo_since):
        _leave_solo(state, vehicle, end)

    by_id = {record.platoon_id: record for record in state.completed}
    with localcontext(CALC_CONTEXT):
        d_out = {
            driver.driver_id:
                state.scenario.vehicle_speed[driver.driver_id]
                * state.solo_time[driver.driver_id]
            for driver in state.scenario.drivers
        }
    return PlatoonTrace(
        day_length=state.scenario.day_length,
        vehicle_speed=dict(state.scenario.vehicle_speed),
        delta=state.scenario.delta,
        eta=state.scenario.eta,
        decimals=state.scenario.decimals,
        drivers=state.scenario.drivers,
        platoons=tuple(by_id[pid] for pid in state.platoon_order),
        memberships=tuple(state.memberships),
        out_platoon_distance=d_out,
    )


def run(scenario: ScenarioSpec) -> PlatoonTrace:
    """Simulate a scenario start to finish."""
    state = initial_state(scenario)
    for event in scenario.events:
        apply_event(state, event)
    return finalize(state)
