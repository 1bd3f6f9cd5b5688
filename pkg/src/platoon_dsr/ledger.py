"""Append-only token ledger with two authority accounts.

The "authority" account mints the fixed supply and authorizes the
"driver-record" account to draw on it; driver-record credits driver wallets
(keyed by driver id) and stores the matching per-day driver records. One
chain holds both transaction kinds.

Commits are serialized behind a single lock; a block either applies whole
or not at all. State is an in-memory replay of the file: reopening a ledger
reconstructs exactly the same balances, allowances, nonces, and records.
"""

from __future__ import annotations

import calendar
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import date as Date
from pathlib import Path

from .chain import (
    Block,
    DecodeError,
    DriverRecord,
    GENESIS_PREV_HASH,
    Transaction,
    TxKind,
    decode_block_payload,
    encode_file_record,
    iter_file_records,
    payload_hash,
)
from .domain import DEFAULT_DECIMALS, TokenAmount, tokens_from_earnings
from .earnings import Settlement
from .errors import (
    AlreadyMinted,
    DecimalsMismatch,
    DuplicateRecord,
    InsufficientAllowance,
    InsufficientBalance,
    LedgerError,
    NotAuthority,
    UnknownAccount,
    ValidationFailed,
)

AUTHORITY = "authority"
DRIVER_RECORD = "driver-record"

#: Whole tokens minted by default, matching the reference deployment.
DEFAULT_SUPPLY_TOKENS = 10_000_000


def timestamp_for_date(day: Date) -> int:
    """UTC midnight of a calendar date, as unix seconds."""
    return calendar.timegm(day.timetuple())


@dataclass(frozen=True)
class CorruptionReport:
    """First divergence found while verifying a chain."""

    block_index: int
    field: str
    detail: str

    def __str__(self) -> str:
        return f"block {self.block_index}: {self.field} corrupt ({self.detail})"


@dataclass
class AccountState:
    decimals: int | None = None
    balances: dict[str, int] = field(default_factory=dict)
    allowances: dict[tuple[str, str], int] = field(default_factory=dict)
    total_supply: int = 0
    minted: bool = False
    nonces: dict[str, int] = field(default_factory=dict)
    records: dict[tuple[str, str], DriverRecord] = field(default_factory=dict)

    def copy(self) -> "AccountState":
        return AccountState(
            decimals=self.decimals,
            balances=dict(self.balances),
            allowances=dict(self.allowances),
            total_supply=self.total_supply,
            minted=self.minted,
            nonces=dict(self.nonces),
            records=dict(self.records),
        )


def _check_amount(state: AccountState, tx: Transaction):
    if tx.amount is not None and tx.amount.decimals != state.decimals:
        raise DecimalsMismatch(
            f"amount uses {tx.amount.decimals} decimals, ledger uses {state.decimals}"
        )


def _apply_tx(state: AccountState, tx: Transaction):
    """Validate one transaction against ``state`` and apply it. Raises a
    typed LedgerError without mutating on failure paths that matter."""
    if tx.kind == TxKind.GENESIS:
        if state.decimals is not None:
            raise LedgerError("genesis transaction outside block 0")
        if tx.amount is None or tx.amount.base_units != 0:
            raise LedgerError("genesis transaction must carry a zero amount")
        state.decimals = tx.amount.decimals
    elif state.decimals is None:
        raise LedgerError("ledger has no genesis block")

    expected_nonce = state.nonces.get(tx.submitter, 0)
    if tx.nonce != expected_nonce:
        raise LedgerError(
            f"bad nonce for {tx.submitter!r}: expected {expected_nonce}, got {tx.nonce}"
        )

    if tx.kind == TxKind.MINT:
        _check_amount(state, tx)
        if tx.from_account != AUTHORITY or tx.to_account != AUTHORITY:
            raise NotAuthority(
                f"only {AUTHORITY!r} may mint, got {tx.from_account!r}")
        if state.minted:
            raise AlreadyMinted("the fixed supply has already been minted")
        state.minted = True
        state.balances[AUTHORITY] = (
            state.balances.get(AUTHORITY, 0) + tx.amount.base_units)
        state.total_supply += tx.amount.base_units
    elif tx.kind == TxKind.APPROVE:
        _check_amount(state, tx)
        if tx.from_account not in state.balances:
            raise UnknownAccount(f"no such account {tx.from_account!r}")
        state.allowances[(tx.from_account, tx.to_account)] = tx.amount.base_units
    elif tx.kind == TxKind.TRANSFER_FROM:
        _check_amount(state, tx)
        allowance = state.allowances.get((tx.from_account, tx.spender), 0)
        if allowance < tx.amount.base_units:
            raise InsufficientAllowance(
                f"{tx.spender!r} may spend {allowance} base units of "
                f"{tx.from_account!r}, wanted {tx.amount.base_units}")
        balance = state.balances.get(tx.from_account, 0)
        if balance < tx.amount.base_units:
            raise InsufficientBalance(
                f"{tx.from_account!r} holds {balance} base units, "
                f"wanted {tx.amount.base_units}")
        state.allowances[(tx.from_account, tx.spender)] = allowance - tx.amount.base_units
        state.balances[tx.from_account] = balance - tx.amount.base_units
        state.balances[tx.to_account] = (
            state.balances.get(tx.to_account, 0) + tx.amount.base_units)
    elif tx.kind == TxKind.CREDIT_DRIVER:
        _check_amount(state, tx)
        balance = state.balances.get(tx.from_account, 0)
        if balance < tx.amount.base_units:
            raise InsufficientBalance(
                f"{tx.from_account!r} holds {balance} base units, "
                f"wanted {tx.amount.base_units}")
        state.balances[tx.from_account] = balance - tx.amount.base_units
        state.balances[tx.to_account] = (
            state.balances.get(tx.to_account, 0) + tx.amount.base_units)
    elif tx.kind == TxKind.STORE_RECORD:
        key = (tx.record.driver_id, tx.record.earning_date.isoformat())
        if key in state.records:
            raise DuplicateRecord(
                f"record for {key[0]!r} on {key[1]} already stored")
        state.records[key] = tx.record

    state.nonces[tx.submitter] = expected_nonce + 1


def _replay(blocks: list[Block]) -> AccountState:
    state = AccountState()
    for block in blocks:
        for tx in block.transactions:
            _apply_tx(state, tx)
    return state


def _read_blocks(data: bytes) -> list[Block]:
    """Decode and fully verify a ledger file; raises LedgerError on corruption."""
    report = _verify_bytes(data)
    if report is not None:
        raise LedgerError(f"corrupt ledger: {report}")
    blocks = []
    for payload, stored_hash in iter_file_records(data):
        blocks.append(decode_block_payload(payload, stored_hash))
    return blocks


def _verify_bytes(data: bytes) -> CorruptionReport | None:
    blocks = []
    index = 0
    try:
        for payload, stored_hash in iter_file_records(data):
            # hash the bytes as written, so detection never depends on how
            # leniently a field parses
            if payload_hash(payload) != stored_hash:
                return CorruptionReport(index, "hash",
                                        "recomputed hash does not match stored hash")
            try:
                block = decode_block_payload(payload, stored_hash)
            except DecodeError as exc:
                return CorruptionReport(index, "encoding", str(exc))
            if block.index != index:
                return CorruptionReport(index, "index",
                                        f"stored index {block.index}, expected {index}")
            if index == 0:
                if block.prev_hash != GENESIS_PREV_HASH:
                    return CorruptionReport(0, "prev_hash",
                                            "genesis prev_hash is not all zero bytes")
            elif block.prev_hash != blocks[-1].hash:
                return CorruptionReport(index, "prev_hash",
                                        "does not match previous block's hash")
            blocks.append(block)
            index += 1
    except DecodeError as exc:
        return CorruptionReport(index, "encoding", str(exc))

    if not blocks:
        return CorruptionReport(0, "encoding", "ledger file has no genesis block")

    state = AccountState()
    for block in blocks:
        for position, tx in enumerate(block.transactions):
            try:
                _apply_tx(state, tx)
            except LedgerError as exc:
                return CorruptionReport(
                    block.index, "transactions",
                    f"replay fails at transaction {position}: {exc}")
    return None


def verify_file(path: str | Path) -> CorruptionReport | None:
    """Recompute every hash and replay every transaction from genesis."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        return CorruptionReport(0, "file", str(exc))
    return _verify_bytes(data)


class Ledger:
    """A hash-chained token ledger backed by one append-only file."""

    def __init__(self, path: Path, blocks: list[Block], state: AccountState):
        self.path = path
        self._blocks = blocks
        self._state = state
        self._lock = threading.Lock()

    # --- lifecycle -----------------------------------------------------

    @classmethod
    def create(cls, path: str | Path, decimals: int = DEFAULT_DECIMALS,
               timestamp: int = 0) -> "Ledger":
        path = Path(path)
        if path.exists() and path.stat().st_size > 0:
            raise LedgerError(f"ledger already exists at {path}")
        genesis = Block(
            index=0,
            timestamp=timestamp,
            prev_hash=GENESIS_PREV_HASH,
            transactions=(
                Transaction(kind=TxKind.GENESIS, from_account="",
                            amount=TokenAmount(0, decimals), nonce=0),
            ),
        )
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(encode_file_record(genesis))
            fh.flush()
            os.fsync(fh.fileno())
        return cls(path, [genesis], _replay([genesis]))

    @classmethod
    def open(cls, path: str | Path) -> "Ledger":
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise LedgerError(f"cannot read ledger: {exc}")
        blocks = _read_blocks(data)
        return cls(path, blocks, _replay(blocks))

    # --- queries ---------------------------------------------------------

    @property
    def decimals(self) -> int:
        return self._state.decimals

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def height(self) -> int:
        return len(self._blocks)

    def total_supply(self) -> TokenAmount:
        return TokenAmount(self._state.total_supply, self.decimals)

    def balance_of(self, account: str) -> TokenAmount:
        return TokenAmount(self._state.balances.get(account, 0), self.decimals)

    def allowance(self, owner: str, spender: str) -> TokenAmount:
        return TokenAmount(self._state.allowances.get((owner, spender), 0),
                           self.decimals)

    def records_for(self, driver_id: str) -> list[DriverRecord]:
        records = [r for (d, _), r in self._state.records.items() if d == driver_id]
        return sorted(records, key=lambda r: r.earning_date)

    def has_record(self, driver_id: str, day: Date) -> bool:
        return (driver_id, day.isoformat()) in self._state.records

    # --- transaction builders -------------------------------------------

    def mint(self, caller: str, amount: TokenAmount) -> Transaction:
        return Transaction(kind=TxKind.MINT, from_account=caller,
                           to_account=caller, amount=amount)

    def approve(self, owner: str, spender: str, amount: TokenAmount) -> Transaction:
        return Transaction(kind=TxKind.APPROVE, from_account=owner,
                           to_account=spender, amount=amount)

    def transfer_from(self, spender: str, owner: str, to: str,
                      amount: TokenAmount) -> Transaction:
        return Transaction(kind=TxKind.TRANSFER_FROM, from_account=owner,
                           to_account=to, spender=spender, amount=amount)

    def credit_driver(self, driver_record_account: str, driver_wallet: str,
                      settlement: Settlement, record: DriverRecord) -> list[Transaction]:
        """The paired CreditDriver + StoreRecord transactions for one settlement."""
        if record.driver_id != settlement.driver_id:
            raise LedgerError("record and settlement driver ids differ")
        if record.earning_date != settlement.earning_date:
            raise LedgerError("record and settlement dates differ")
        amount = tokens_from_earnings(settlement.er_total, self.decimals)
        return [
            Transaction(kind=TxKind.CREDIT_DRIVER,
                        from_account=driver_record_account,
                        to_account=driver_wallet, amount=amount),
            Transaction(kind=TxKind.STORE_RECORD,
                        from_account=driver_record_account, record=record),
        ]

    # --- commits ----------------------------------------------------------

    def append_block(self, transactions: list[Transaction],
                     timestamp: int) -> Block:
        """Validate and commit one block atomically."""
        if not transactions:
            raise ValidationFailed("a block needs at least one transaction")
        with self._lock:
            scratch = self._state.copy()
            final_txs = []
            for position, tx in enumerate(transactions):
                if tx.nonce is None:
                    tx = replace(tx, nonce=scratch.nonces.get(tx.submitter, 0))
                try:
                    _apply_tx(scratch, tx)
                except LedgerError as exc:
                    raise ValidationFailed(str(exc), index=position, cause=exc)
                final_txs.append(tx)
            block = Block(
                index=len(self._blocks),
                timestamp=timestamp,
                prev_hash=self._blocks[-1].hash,
                transactions=tuple(final_txs),
            )
            with open(self.path, "ab") as fh:
                fh.write(encode_file_record(block))
                fh.flush()
                os.fsync(fh.fileno())
            self._blocks.append(block)
            self._state = scratch
            return block

    # --- verification -----------------------------------------------------

    def verify(self) -> CorruptionReport | None:
        """Re-verify the backing file and compare the replay to live state."""
        report = verify_file(self.path)
        if report is not None:
            return report
        data = self.path.read_bytes()
        blocks = [decode_block_payload(p, h) for p, h in iter_file_records(data)]
        replayed = _replay(blocks)
        if replayed != self._state:
            return CorruptionReport(len(blocks) - 1, "state",
                                    "replayed state differs from live state")
        return None

    def export(self) -> list[dict]:
        return [block.to_dict() for block in self._blocks]
