"""Hash-chained blocks and their canonical byte encoding.

Hashes must be identical across implementations, so blocks hash a canonical
byte-stable serialization rather than JSON: fixed field order, big-endian
integers, length-prefixed UTF-8 strings, decimals as exact strings.

Block payload layout::

    index u64 | timestamp u64 | prev_hash 32 | tx_count u32 | tx...

Transaction layout::

    kind u8 | from str | to str | spender str
    | has_amount u8 [base_units u64, decimals u8]
    | has_record u8 [record]
    | nonce u64

Driver record layout::

    driver_id str | current_earnings decstr | rank u8 | over_speed u32
    | distance_travelled decstr | sharp_accel u32 | sharp_decel u32
    | platoons_joined u32 | leader_activity u8 | earning_date str

The ledger file is an append-only sequence of records, each
``payload_len u32 | payload | sha256(payload) 32``; there is no file
header, so every byte belongs to exactly one block and any single-bit flip
is attributable to a block index.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import date as Date
from decimal import Decimal
from enum import IntEnum

from .domain import Rank, TokenAmount, as_decimal

HASH_BYTES = 32
GENESIS_PREV_HASH = bytes(HASH_BYTES)


class DecodeError(ValueError):
    """Byte stream does not decode as a well-formed block."""


class TxKind(IntEnum):
    GENESIS = 0
    MINT = 1
    APPROVE = 2
    TRANSFER_FROM = 3
    CREDIT_DRIVER = 4
    STORE_RECORD = 5


@dataclass(frozen=True)
class DriverRecord:
    """The per-day driver attribute bundle stored on-chain."""

    driver_id: str
    current_earnings: Decimal
    rank: Rank
    over_speed_count: int
    distance_travelled: Decimal
    sharp_accel_count: int
    sharp_decel_count: int
    platoons_joined: int
    leader_activity: bool
    earning_date: Date

    def __post_init__(self):
        if not self.driver_id:
            raise ValueError("driver_id must be non-empty")
        object.__setattr__(self, "rank", Rank(self.rank))
        object.__setattr__(self, "current_earnings",
                           as_decimal(self.current_earnings, "current_earnings"))
        object.__setattr__(self, "distance_travelled",
                           as_decimal(self.distance_travelled, "distance_travelled"))
        if self.distance_travelled < 0:
            raise ValueError("distance_travelled must be >= 0")
        for name in ("over_speed_count", "sharp_accel_count", "sharp_decel_count",
                     "platoons_joined"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not isinstance(self.earning_date, Date):
            raise ValueError("earning_date must be a date")

    def to_dict(self) -> dict:
        return {
            "driver_id": self.driver_id,
            "current_earnings": str(self.current_earnings),
            "rank": int(self.rank),
            "over_speed_count": self.over_speed_count,
            "distance_travelled": str(self.distance_travelled),
            "sharp_accel_count": self.sharp_accel_count,
            "sharp_decel_count": self.sharp_decel_count,
            "platoons_joined": self.platoons_joined,
            "leader_activity": self.leader_activity,
            "earning_date": self.earning_date.isoformat(),
        }


@dataclass(frozen=True)
class Transaction:
    """One ledger entry. ``spender`` is set only for TRANSFER_FROM.

    The submitter (whose nonce sequence the transaction consumes) is the
    spender for TRANSFER_FROM and ``from_account`` otherwise.
    """

    kind: TxKind
    from_account: str
    to_account: str = ""
    spender: str = ""
    amount: TokenAmount | None = None
    record: DriverRecord | None = None
    nonce: int | None = None

    def __post_init__(self):
        if self.kind in (TxKind.MINT, TxKind.TRANSFER_FROM):
            if self.amount is None or self.amount.base_units <= 0:
                raise ValueError(f"{self.kind.name} amount must be > 0")
        elif self.kind in (TxKind.APPROVE, TxKind.CREDIT_DRIVER, TxKind.GENESIS):
            if self.amount is None:
                raise ValueError(f"{self.kind.name} requires an amount")
        if self.kind == TxKind.STORE_RECORD:
            if self.record is None:
                raise ValueError("STORE_RECORD requires a record")
            if self.amount is not None:
                raise ValueError("STORE_RECORD carries no amount")
        elif self.record is not None:
            raise ValueError(f"{self.kind.name} carries no record")
        if self.kind == TxKind.TRANSFER_FROM and not self.spender:
            raise ValueError("TRANSFER_FROM requires a spender")

    @property
    def submitter(self) -> str:
        return self.spender if self.kind == TxKind.TRANSFER_FROM else self.from_account

    def to_dict(self) -> dict:
        data = {
            "kind": self.kind.name.lower(),
            "from": self.from_account,
            "to": self.to_account,
            "nonce": self.nonce,
        }
        if self.spender:
            data["spender"] = self.spender
        if self.amount is not None:
            data["amount"] = {"base_units": self.amount.base_units,
                              "decimals": self.amount.decimals}
        if self.record is not None:
            data["record"] = self.record.to_dict()
        return data


@dataclass(frozen=True)
class Block:
    index: int
    timestamp: int
    prev_hash: bytes
    transactions: tuple[Transaction, ...]
    hash: bytes = field(default=b"")

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("block index must be >= 0")
        if len(self.prev_hash) != HASH_BYTES:
            raise ValueError("prev_hash must be 32 bytes")
        if not self.hash:
            object.__setattr__(self, "hash", compute_hash(self))

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "timestamp": self.timestamp,
            "prev_hash": self.prev_hash.hex(),
            "hash": self.hash.hex(),
            "transactions": [t.to_dict() for t in self.transactions],
        }


# --- canonical encoding -------------------------------------------------

def _u8(value: int) -> bytes:
    return value.to_bytes(1, "big")


def _u32(value: int) -> bytes:
    return value.to_bytes(4, "big")


def _u64(value: int) -> bytes:
    return value.to_bytes(8, "big")


def _string(value: str) -> bytes:
    raw = value.encode("utf-8")
    return _u32(len(raw)) + raw


def _decimal(value: Decimal) -> bytes:
    return _string(str(value))


def _amount(amount: TokenAmount) -> bytes:
    return _u64(amount.base_units) + _u8(amount.decimals)


def _record(record: DriverRecord) -> bytes:
    return b"".join([
        _string(record.driver_id),
        _decimal(record.current_earnings),
        _u8(int(record.rank)),
        _u32(record.over_speed_count),
        _decimal(record.distance_travelled),
        _u32(record.sharp_accel_count),
        _u32(record.sharp_decel_count),
        _u32(record.platoons_joined),
        _u8(1 if record.leader_activity else 0),
        _string(record.earning_date.isoformat()),
    ])


def encode_transaction(tx: Transaction) -> bytes:
    if tx.nonce is None:
        raise ValueError("cannot encode a transaction without a nonce")
    parts = [
        _u8(int(tx.kind)),
        _string(tx.from_account),
        _string(tx.to_account),
        _string(tx.spender),
    ]
    parts.append(_u8(1) + _amount(tx.amount) if tx.amount is not None else _u8(0))
    parts.append(_u8(1) + _record(tx.record) if tx.record is not None else _u8(0))
    parts.append(_u64(tx.nonce))
    return b"".join(parts)


def encode_block_payload(block: Block) -> bytes:
    parts = [
        _u64(block.index),
        _u64(block.timestamp),
        block.prev_hash,
        _u32(len(block.transactions)),
    ]
    parts.extend(encode_transaction(tx) for tx in block.transactions)
    return b"".join(parts)


def compute_hash(block: Block) -> bytes:
    return hashlib.sha256(encode_block_payload(block)).digest()


def payload_hash(payload: bytes) -> bytes:
    """Hash of the exact bytes as written, independent of decoding."""
    return hashlib.sha256(payload).digest()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated data")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def string(self) -> str:
        length = self.u32()
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8 string: {exc}")

    def flag(self, what: str) -> bool:
        value = self.u8()
        if value not in (0, 1):
            raise DecodeError(f"{what} flag must be 0 or 1, got {value}")
        return value == 1

    def decimal(self, what: str) -> Decimal:
        raw = self.string()
        try:
            value = Decimal(raw)
        except ArithmeticError:
            raise DecodeError(f"invalid decimal for {what}: {raw!r}")
        # decoding must be injective for tamper evidence: only the canonical
        # spelling (the one the encoder emits) is accepted
        if str(value) != raw:
            raise DecodeError(f"non-canonical decimal for {what}: {raw!r}")
        return value

    def done(self) -> bool:
        return self.pos == len(self.data)


def _decode_record(reader: _Reader) -> DriverRecord:
    driver_id = reader.string()
    current_earnings = reader.decimal("current_earnings")
    rank = reader.u8()
    over_speed = reader.u32()
    distance = reader.decimal("distance_travelled")
    sharp_accel = reader.u32()
    sharp_decel = reader.u32()
    platoons_joined = reader.u32()
    leader_activity = reader.flag("leader_activity")
    raw_date = reader.string()
    try:
        earning_date = Date.fromisoformat(raw_date)
    except ValueError:
        raise DecodeError(f"invalid earning_date: {raw_date!r}")
    if earning_date.isoformat() != raw_date:
        raise DecodeError(f"non-canonical earning_date: {raw_date!r}")
    try:
        return DriverRecord(
            driver_id=driver_id,
            current_earnings=current_earnings,
            rank=Rank(rank),
            over_speed_count=over_speed,
            distance_travelled=distance,
            sharp_accel_count=sharp_accel,
            sharp_decel_count=sharp_decel,
            platoons_joined=platoons_joined,
            leader_activity=leader_activity,
            earning_date=earning_date,
        )
    except ValueError as exc:
        raise DecodeError(f"invalid driver record: {exc}")


def _decode_transaction(reader: _Reader) -> Transaction:
    try:
        kind = TxKind(reader.u8())
    except ValueError as exc:
        raise DecodeError(f"unknown transaction kind: {exc}")
    from_account = reader.string()
    to_account = reader.string()
    spender = reader.string()
    amount = None
    if reader.flag("amount"):
        base_units = reader.u64()
        decimals = reader.u8()
        amount = TokenAmount(base_units, decimals)
    record = None
    if reader.flag("record"):
        record = _decode_record(reader)
    nonce = reader.u64()
    try:
        return Transaction(kind=kind, from_account=from_account,
                           to_account=to_account, spender=spender,
                           amount=amount, record=record, nonce=nonce)
    except ValueError as exc:
        raise DecodeError(f"invalid transaction: {exc}")


def decode_block_payload(payload: bytes, stored_hash: bytes) -> Block:
    reader = _Reader(payload)
    index = reader.u64()
    timestamp = reader.u64()
    prev_hash = reader.take(HASH_BYTES)
    count = reader.u32()
    transactions = tuple(_decode_transaction(reader) for _ in range(count))
    if not reader.done():
        raise DecodeError(f"{len(payload) - reader.pos} trailing bytes in block payload")
    return Block(index=index, timestamp=timestamp, prev_hash=prev_hash,
                 transactions=transactions, hash=stored_hash)


# --- ledger file records ------------------------------------------------

def encode_file_record(block: Block) -> bytes:
    payload = encode_block_payload(block)
    return _u32(len(payload)) + payload + block.hash


def iter_file_records(data: bytes):
    """Yield (position, payload, stored_hash) triples; DecodeError names no index,
    the caller knows which record it was reading."""
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise DecodeError("truncated record length")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if offset + length + HASH_BYTES > len(data):
            raise DecodeError("record extends past end of file")
        payload = data[offset:offset + length]
        offset += length
        stored_hash = data[offset:offset + HASH_BYTES]
        offset += HASH_BYTES
        yield payload, stored_hash
