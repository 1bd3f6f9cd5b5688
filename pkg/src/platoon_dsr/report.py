"""Human-readable tables for traces, settlements, and driver records.

The dict-based functions take the JSON shapes the service emits, so the CLI
can render straight from a response body; the object-based wrappers serve
library users.
"""

from __future__ import annotations

from .earnings import Settlement
from .trace import PlatoonTrace


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i])
                               for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def platoon_tables(trace: dict) -> str:
    """Per-platoon segment tables plus the out-of-platoon summary."""
    chunks = []
    for platoon in trace["platoons"]:
        dissolved = platoon.get("dissolved_at")
        dissolved = "day end" if dissolved is None else str(dissolved)
        rows = [
            [str(i), seg["initiating_kind"], str(seg["length"]),
             str(seg["distance"]), str(seg["start_time"]), str(seg["end_time"])]
            for i, seg in enumerate(platoon["segments"])
        ]
        chunks.append(
            f"platoon {platoon['platoon_id']} "
            f"(formed {platoon['formed_at']}, dissolved {dissolved})\n"
            + _table(["state", "cause", "cars", "miles", "from", "to"], rows)
        )
    rows = [[driver["driver_id"], str(trace["out_platoon_distance"][driver["driver_id"]])]
            for driver in trace["drivers"]]
    chunks.append("out-of-platoon miles\n" + _table(["driver", "miles"], rows))
    return "\n\n".join(chunks)


def settlement_table(settlements: list[dict]) -> str:
    rows = [
        [s["driver_id"], str(s["episode_count"]), str(s["er_join"]),
         str(s["er_leave"]), str(s["er_out"]), str(s["penalty_total"]),
         str(s["er_total"])]
        for s in settlements
    ]
    return _table(
        ["driver", "platoons", "er_join", "er_leave", "er_out", "penalties", "er_total"],
        rows,
    )


def records_table(records: list[dict]) -> str:
    rows = [
        [r["earning_date"], str(r["current_earnings"]), str(r["rank"]),
         str(r["distance_travelled"]), str(r["platoons_joined"]),
         "yes" if r["leader_activity"] else "no"]
        for r in records
    ]
    return _table(["date", "earnings", "rank", "miles", "platoons", "led"], rows)


def render_platoon_tables(trace: PlatoonTrace) -> str:
    return platoon_tables(trace.to_dict())


def render_settlement_table(settlements: list[Settlement]) -> str:
    return settlement_table([s.to_dict() for s in settlements])
