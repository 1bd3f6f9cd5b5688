"""Core vocabulary shared by the simulator, settlement engine, and ledger.

All money and distance arithmetic runs on :class:`decimal.Decimal` so that
settlements are platform-deterministic and can be compared bit for bit
against an independent oracle. :data:`CALC_CONTEXT` gives enough precision
headroom that day-scale products and sums never round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Context, Decimal, ROUND_HALF_EVEN, localcontext
from typing import Mapping

MIN_RANK = 1
MAX_RANK = 5
#: Lowest rank allowed to head a platoon.
MIN_LEADER_RANK = 4

DEFAULT_DECIMALS = 2
DEFAULT_DELTA = Decimal("0.01")
DEFAULT_ETA = Decimal("10")

#: Shared high-precision context for settlement arithmetic.
CALC_CONTEXT = Context(prec=50)

#: Default tokens-per-mile by rank. The rank heuristic itself is external;
#: only monotonicity is enforced, and scenario files may override the table.
DEFAULT_RATE_TABLE = {
    1: Decimal("0.01"),
    2: Decimal("0.03"),
    3: Decimal("0.09"),
    4: Decimal("0.12"),
    5: Decimal("0.15"),
}


class Rank(int):
    """Driver rank in [1, 5]; higher ranks are safer drivers."""

    def __new__(cls, value: int) -> "Rank":
        value = int(value)
        if not MIN_RANK <= value <= MAX_RANK:
            raise ValueError(f"rank must be in [{MIN_RANK}, {MAX_RANK}], got {value}")
        return super().__new__(cls, value)


def leader_eligible(rank: Rank | int) -> bool:
    """Whether a driver of this rank may head a platoon."""
    return Rank(rank) >= MIN_LEADER_RANK


def as_decimal(value, what: str = "value") -> Decimal:
    """Convert scenario/trace input to Decimal without a binary-float detour.

    Floats are converted through their shortest repr (matching what a JSON
    writer would have emitted); strings and ints convert exactly.
    """
    if isinstance(value, Decimal):
        return value
    if isinstance(value, bool):
        raise ValueError(f"{what} must be a number, got a bool")
    if isinstance(value, float):
        return Decimal(repr(value))
    if isinstance(value, (int, str)):
        try:
            return Decimal(value)
        except ArithmeticError as exc:
            raise ValueError(f"{what} is not a valid decimal: {value!r}") from exc
    raise ValueError(f"{what} must be a number or numeric string, got {type(value).__name__}")


@dataclass(frozen=True)
class EarningRateTable:
    """Tokens-per-mile for each rank; rates strictly increase with rank."""

    rates: Mapping[int, Decimal]

    def __post_init__(self):
        table = {}
        for rank in range(MIN_RANK, MAX_RANK + 1):
            if rank not in self.rates:
                raise ValueError(f"rate table missing rank {rank}")
            rate = as_decimal(self.rates[rank], f"rate for rank {rank}")
            if rate < 0:
                raise ValueError(f"rate for rank {rank} is negative: {rate}")
            table[rank] = rate
        if len(self.rates) != MAX_RANK - MIN_RANK + 1:
            extra = set(self.rates) - set(table)
            raise ValueError(f"rate table has unknown ranks: {sorted(extra)}")
        for rank in range(MIN_RANK + 1, MAX_RANK + 1):
            if table[rank] <= table[rank - 1]:
                raise ValueError(
                    f"rates must strictly increase with rank: "
                    f"rank {rank} ({table[rank]}) <= rank {rank - 1} ({table[rank - 1]})"
                )
        object.__setattr__(self, "rates", table)

    @classmethod
    def default(cls) -> "EarningRateTable":
        return cls(DEFAULT_RATE_TABLE)

    def rate_for(self, rank: Rank | int) -> Decimal:
        return self.rates[Rank(rank)]

    def to_dict(self) -> dict:
        return {str(rank): str(rate) for rank, rate in sorted(self.rates.items())}


@dataclass(frozen=True)
class DriverProfile:
    """Identity, rank, prior-day earning rate, and behavior counters."""

    driver_id: str
    rank: Rank
    prev_day_rate: Decimal
    over_speed_count: int = 0
    sharp_accel_count: int = 0
    sharp_decel_count: int = 0

    def __post_init__(self):
        if not self.driver_id:
            raise ValueError("driver_id must be non-empty")
        object.__setattr__(self, "rank", Rank(self.rank))
        rate = as_decimal(self.prev_day_rate, "prev_day_rate")
        if rate < 0:
            raise ValueError(f"prev_day_rate must be >= 0, got {rate}")
        object.__setattr__(self, "prev_day_rate", rate)
        for name in ("over_speed_count", "sharp_accel_count", "sharp_decel_count"):
            count = getattr(self, name)
            if not isinstance(count, int) or count < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {count!r}")

    def to_dict(self) -> dict:
        return {
            "driver_id": self.driver_id,
            "rank": int(self.rank),
            "prev_day_rate": str(self.prev_day_rate),
            "over_speed_count": self.over_speed_count,
            "sharp_accel_count": self.sharp_accel_count,
            "sharp_decel_count": self.sharp_decel_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DriverProfile":
        return cls(
            driver_id=data["driver_id"],
            rank=Rank(data["rank"]),
            prev_day_rate=as_decimal(data["prev_day_rate"], "prev_day_rate"),
            over_speed_count=int(data.get("over_speed_count", 0)),
            sharp_accel_count=int(data.get("sharp_accel_count", 0)),
            sharp_decel_count=int(data.get("sharp_decel_count", 0)),
        )


@dataclass(frozen=True, order=True)
class TokenAmount:
    """A non-negative token quantity in integral base units.

    ``decimals`` is a ledger-wide constant; mixing amounts with different
    decimals is rejected rather than silently rescaled.
    """

    base_units: int
    decimals: int = field(default=DEFAULT_DECIMALS, compare=False)

    def __post_init__(self):
        if not isinstance(self.base_units, int) or isinstance(self.base_units, bool):
            raise ValueError(f"base_units must be an integer, got {self.base_units!r}")
        if self.base_units < 0:
            raise ValueError(f"base_units must be >= 0, got {self.base_units}")
        if not isinstance(self.decimals, int) or self.decimals < 0:
            raise ValueError(f"decimals must be a non-negative integer, got {self.decimals!r}")

    def _check_compatible(self, other: "TokenAmount"):
        if not isinstance(other, TokenAmount):
            raise TypeError(f"expected TokenAmount, got {type(other).__name__}")
        if other.decimals != self.decimals:
            raise ValueError(
                f"mismatched decimals: {self.decimals} vs {other.decimals}"
            )

    def __add__(self, other: "TokenAmount") -> "TokenAmount":
        self._check_compatible(other)
        return TokenAmount(self.base_units + other.base_units, self.decimals)

    def __sub__(self, other: "TokenAmount") -> "TokenAmount":
        self._check_compatible(other)
        if other.base_units > self.base_units:
            raise ValueError(
                f"token amount would go negative: {self} - {other}"
            )
        return TokenAmount(self.base_units - other.base_units, self.decimals)

    def to_decimal(self) -> Decimal:
        """Value in whole tokens."""
        return Decimal(self.base_units).scaleb(-self.decimals)

    def __str__(self) -> str:
        quantum = Decimal(1).scaleb(-self.decimals) if self.decimals else Decimal(1)
        return str(self.to_decimal().quantize(quantum))

    @classmethod
    def from_tokens(cls, tokens, decimals: int = DEFAULT_DECIMALS) -> "TokenAmount":
        """Exact conversion from a whole-token decimal; rejects sub-unit values."""
        value = as_decimal(tokens, "token amount")
        scaled = value.scaleb(decimals)
        if scaled != scaled.to_integral_value():
            raise ValueError(
                f"{value} tokens is not a whole number of base units at {decimals} decimals"
            )
        return cls(int(scaled), decimals)


def tokens_from_earnings(earnings: Decimal, decimals: int = DEFAULT_DECIMALS) -> TokenAmount:
    """Quantize a settlement into tokens, rounding half-to-even.

    Negative settlements floor to zero base units: the ledger has no debit
    authority over driver wallets.
    """
    value = as_decimal(earnings, "earnings")
    if value <= 0:
        return TokenAmount(0, decimals)
    with localcontext(CALC_CONTEXT):
        quantum = Decimal(1).scaleb(-decimals)
        base_units = int(value.quantize(quantum, rounding=ROUND_HALF_EVEN).scaleb(decimals))
    return TokenAmount(max(base_units, 0), decimals)
