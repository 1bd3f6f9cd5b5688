"""Daily earnings settlement.

A driver's day settles as in-platoon earnings plus out-of-platoon earnings.
The in-platoon part decomposes into a join component and a leave component:
each platoon state belongs to exactly one of them by the maneuver that began
it (formation/join/merge states to the join side, leave/split states to the
leave side), so nothing is double counted.

Leaders are paid on state values (platoon length x distance) with a per-car
bonus ``j*delta`` on the join side and a per-car deduction ``l*delta`` on
the leave side; the deducted rate is deliberately not clamped at zero.
Followers are paid on distance only, at ``rate + delta`` on both sides.
Every episode is charged ``(d_in - eta) * delta`` once at its end if it
covered fewer than ``eta`` in-platoon miles.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from decimal import Decimal, localcontext

from .domain import CALC_CONTEXT, DEFAULT_DELTA, DEFAULT_ETA, DriverProfile, as_decimal
from .errors import InvalidSegment, RoleMismatch
from .trace import (
    DriverEpisode,
    JOIN_PARTITION,
    LEAVE_PARTITION,
    PlatoonTrace,
    Role,
    extract_episodes,
)


@dataclass(frozen=True)
class EpisodeBreakdown:
    """Audit line for one episode inside a Settlement."""

    platoon_id: str
    role: Role
    join_part: Decimal
    leave_part: Decimal
    penalty: Decimal
    d_in: Decimal
    join_count: int
    leave_count: int

    def to_dict(self) -> dict:
        return {
            "platoon_id": self.platoon_id,
            "role": self.role.value,
            "join_part": str(self.join_part),
            "leave_part": str(self.leave_part),
            "penalty": str(self.penalty),
            "d_in": str(self.d_in),
            "join_count": self.join_count,
            "leave_count": self.leave_count,
        }


@dataclass(frozen=True)
class Settlement:
    """Per-driver daily earnings breakdown.

    ``er_leave`` includes penalties; ``penalty_total`` reports them
    separately for audit. The decomposition identities
    ``er_in = er_join + er_leave`` and ``er_total = er_in + er_out``
    hold exactly and are enforced at construction.
    """

    driver_id: str
    earning_date: Date
    er_join: Decimal
    er_leave: Decimal
    er_in: Decimal
    er_out: Decimal
    er_total: Decimal
    penalty_total: Decimal
    episode_count: int
    episodes: tuple[EpisodeBreakdown, ...] = ()

    def __post_init__(self):
        if self.er_in != self.er_join + self.er_leave:
            raise ValueError("er_in must equal er_join + er_leave")
        if self.er_total != self.er_in + self.er_out:
            raise ValueError("er_total must equal er_in + er_out")
        if self.penalty_total > 0:
            raise ValueError("penalty_total must be <= 0")

    def to_dict(self) -> dict:
        return {
            "driver_id": self.driver_id,
            "earning_date": self.earning_date.isoformat(),
            "er_join": str(self.er_join),
            "er_leave": str(self.er_leave),
            "er_in": str(self.er_in),
            "er_out": str(self.er_out),
            "er_total": str(self.er_total),
            "penalty_total": str(self.penalty_total),
            "episode_count": self.episode_count,
            "episodes": [e.to_dict() for e in self.episodes],
        }


def state_value(length: int, distance: Decimal) -> Decimal:
    """Car-miles accrued in one platoon state: length times distance."""
    if length < 2:
        raise InvalidSegment(f"a platoon state needs >= 2 cars, got {length}")
    distance = as_decimal(distance, "distance")
    if distance < 0:
        raise InvalidSegment(f"distance must be >= 0, got {distance}")
    with localcontext(CALC_CONTEXT):
        return Decimal(length) * distance


def out_platoon_earnings(prev_rate: Decimal, d_out: Decimal) -> Decimal:
    """Solo miles paid at the driver's prior-day rate."""
    prev_rate = as_decimal(prev_rate, "prev_rate")
    d_out = as_decimal(d_out, "d_out")
    if prev_rate < 0:
        raise ValueError(f"prev_rate must be >= 0, got {prev_rate}")
    if d_out < 0:
        raise ValueError(f"d_out must be >= 0, got {d_out}")
    with localcontext(CALC_CONTEXT):
        return prev_rate * d_out


def penalty(d_in: Decimal, eta: Decimal = DEFAULT_ETA,
            delta: Decimal = DEFAULT_DELTA) -> Decimal:
    """Early-exit charge: (d_in - eta) * delta when d_in < eta, else zero."""
    d_in = as_decimal(d_in, "d_in")
    eta = as_decimal(eta, "eta")
    delta = as_decimal(delta, "delta")
    if d_in < 0 or eta <= 0 or delta <= 0:
        raise ValueError("penalty requires d_in >= 0, eta > 0, delta > 0")
    if d_in >= eta:
        return Decimal(0)
    with localcontext(CALC_CONTEXT):
        return (d_in - eta) * delta


def _require_role(episode: DriverEpisode, role: Role, op: str):
    if episode.role != role:
        raise RoleMismatch(f"{op} requires a {role.value} episode, got {episode.role.value}")


def join_earnings_leader(episode: DriverEpisode, prev_rate: Decimal,
                         delta: Decimal = DEFAULT_DELTA) -> Decimal:
    """Leader pay over the join partition, with the j*delta bonus."""
    _require_role(episode, Role.LEADER, "join_earnings_leader")
    with localcontext(CALC_CONTEXT):
        total = sum(
            (state_value(s.length, s.distance) for s in episode.segments
             if s.initiating_kind in JOIN_PARTITION),
            Decimal(0),
        )
        return total * (as_decimal(prev_rate) + episode.join_count * as_decimal(delta))


def join_earnings_follower(episode: DriverEpisode, prev_rate: Decimal,
                           delta: Decimal = DEFAULT_DELTA) -> Decimal:
    """Follower pay over the join partition: distance only, flat delta."""
    _require_role(episode, Role.FOLLOWER, "join_earnings_follower")
    with localcontext(CALC_CONTEXT):
        total = sum(
            (s.distance for s in episode.segments
             if s.initiating_kind in JOIN_PARTITION),
            Decimal(0),
        )
        return total * (as_decimal(prev_rate) + as_decimal(delta))


def leave_earnings_leader(episode: DriverEpisode, prev_rate: Decimal,
                          delta: Decimal = DEFAULT_DELTA,
                          eta: Decimal = DEFAULT_ETA) -> Decimal:
    """Leader pay over the leave partition, docked l*delta, plus penalty."""
    _require_role(episode, Role.LEADER, "leave_earnings_leader")
    with localcontext(CALC_CONTEXT):
        total = sum(
            (state_value(s.length, s.distance) for s in episode.segments
             if s.initiating_kind in LEAVE_PARTITION),
            Decimal(0),
        )
        rate = as_decimal(prev_rate) - episode.leave_count * as_decimal(delta)
        return total * rate + penalty(episode.d_in, eta, delta)


def leave_earnings_follower(episode: DriverEpisode, prev_rate: Decimal,
                            delta: Decimal = DEFAULT_DELTA,
                            eta: Decimal = DEFAULT_ETA) -> Decimal:
    """Follower pay over the leave partition, plus penalty."""
    _require_role(episode, Role.FOLLOWER, "leave_earnings_follower")
    with localcontext(CALC_CONTEXT):
        total = sum(
            (s.distance for s in episode.segments
             if s.initiating_kind in LEAVE_PARTITION),
            Decimal(0),
        )
        return total * (as_decimal(prev_rate) + as_decimal(delta)) \
            + penalty(episode.d_in, eta, delta)


def episode_earnings(episode: DriverEpisode, prev_rate: Decimal,
                     delta: Decimal = DEFAULT_DELTA,
                     eta: Decimal = DEFAULT_ETA) -> tuple[Decimal, Decimal]:
    """(join_part, leave_part) for one episode, dispatched by role.

    The maneuver dispatch falls out of the segment partition: a surviving
    merge leader's continuing episode carries the merge state in its join
    partition with the absorbed cars counted in j; an absorbed leader starts
    over as a follower; post-split episodes open with a split state in the
    leave partition, so both resulting leaders and all followers settle
    through the penalized leave operations.
    """
    if episode.role == Role.LEADER:
        return (
            join_earnings_leader(episode, prev_rate, delta),
            leave_earnings_leader(episode, prev_rate, delta, eta),
        )
    return (
        join_earnings_follower(episode, prev_rate, delta),
        leave_earnings_follower(episode, prev_rate, delta, eta),
    )


def daily_settlement(driver: DriverProfile, episodes: list[DriverEpisode],
                     d_out: Decimal, earning_date: Date,
                     delta: Decimal = DEFAULT_DELTA,
                     eta: Decimal = DEFAULT_ETA) -> Settlement:
    """Settle one driver's day from their episodes and solo miles."""
    breakdowns = []
    with localcontext(CALC_CONTEXT):
        er_join = Decimal(0)
        er_leave = Decimal(0)
        penalty_total = Decimal(0)
        for episode in episodes:
            join_part, leave_part = episode_earnings(
                episode, driver.prev_day_rate, delta, eta)
            charge = penalty(episode.d_in, eta, delta)
            er_join += join_part
            er_leave += leave_part
            penalty_total += charge
            breakdowns.append(EpisodeBreakdown(
                platoon_id=episode.platoon_id,
                role=episode.role,
                join_part=join_part,
                leave_part=leave_part,
                penalty=charge,
                d_in=episode.d_in,
                join_count=episode.join_count,
                leave_count=episode.leave_count,
            ))
        er_out = out_platoon_earnings(driver.prev_day_rate, d_out)
        er_in = er_join + er_leave
        return Settlement(
            driver_id=driver.driver_id,
            earning_date=earning_date,
            er_join=er_join,
            er_leave=er_leave,
            er_in=er_in,
            er_out=er_out,
            er_total=er_in + er_out,
            penalty_total=penalty_total,
            episode_count=len(episodes),
            episodes=tuple(breakdowns),
        )


def settle_day(trace: PlatoonTrace, earning_date: Date) -> list[Settlement]:
    """Settle every driver in a trace, in the trace's driver order."""
    settlements = []
    for driver in trace.drivers:
        episodes, d_out = extract_episodes(trace, driver.driver_id)
        settlements.append(daily_settlement(
            driver, episodes, d_out, earning_date,
            delta=trace.delta, eta=trace.eta,
        ))
    return settlements
