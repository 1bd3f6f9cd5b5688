"""Small builders for hand-made segments and episodes."""

from decimal import Decimal

from platoon_dsr.trace import (
    DriverEpisode,
    JOIN_COUNTED,
    LEAVE_COUNTED,
    Role,
    SegmentKind,
    StateSegment,
    TerminalKind,
)


def seg(kind: str, length: int, distance, cars_delta: int = 0) -> StateSegment:
    return StateSegment(
        length=length,
        distance=Decimal(str(distance)),
        initiating_kind=SegmentKind(kind),
        cars_delta=cars_delta,
        start_time=Decimal(0),
        end_time=Decimal(0),
    )


def episode(role: str, segments, join_count=None, leave_count=None,
            terminal: str = "day-end", platoon_id: str = "P1") -> DriverEpisode:
    """Build an episode; j/l derive from segment deltas unless given."""
    segments = tuple(segments)
    if join_count is None:
        join_count = sum(s.cars_delta for s in segments
                         if s.initiating_kind in JOIN_COUNTED)
    if leave_count is None:
        leave_count = sum(s.cars_delta for s in segments
                          if s.initiating_kind in LEAVE_COUNTED)
    return DriverEpisode(
        platoon_id=platoon_id,
        role=Role(role),
        segments=segments,
        join_count=join_count,
        leave_count=leave_count,
        d_in=sum((s.distance for s in segments), Decimal(0)),
        terminal_kind=TerminalKind(terminal),
    )
