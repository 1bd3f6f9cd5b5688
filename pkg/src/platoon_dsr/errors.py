"""Exception types shared across the simulator, settlement engine, and ledger."""

from __future__ import annotations


class PlatoonDSRError(Exception):
    """Base class for all package errors."""


class ScenarioError(PlatoonDSRError):
    """A scenario file or dict failed structural validation.

    ``pointer`` is a slash-separated path into the document (e.g.
    ``events/3/time``) so CLI diagnostics can point at the offending field.
    """

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}" if pointer else message)


class TraceError(PlatoonDSRError):
    """A trace file or dict failed structural validation."""


class InfeasibleEvent(PlatoonDSRError):
    """A maneuver cannot be applied to the current world state."""


class IneligibleLeader(PlatoonDSRError):
    """Formation or split would install a leader with rank below the minimum."""


class UnknownDriver(PlatoonDSRError):
    """Driver id not present in the trace."""


class InvalidSegment(PlatoonDSRError):
    """State segment violates length >= 2 or distance >= 0."""


class RoleMismatch(PlatoonDSRError):
    """An earnings operation was called with an episode of the wrong role."""


class LedgerError(PlatoonDSRError):
    """Base class for ledger errors."""


class NotAuthority(LedgerError):
    """Mint attempted by an account other than the tokenization authority."""


class AlreadyMinted(LedgerError):
    """The fixed supply has already been minted."""


class UnknownAccount(LedgerError):
    """Operation requires an existing account."""


class InsufficientBalance(LedgerError):
    """Account balance below the requested amount."""


class InsufficientAllowance(LedgerError):
    """Spender allowance below the requested amount."""


class DuplicateRecord(LedgerError):
    """A driver record for this (driver, date) is already stored."""


class DecimalsMismatch(LedgerError):
    """Token amount decimals differ from the ledger-wide constant."""


class ValidationFailed(LedgerError):
    """A block was rejected; no transaction in it was applied.

    ``index`` is the position of the offending transaction within the block
    (None when the block as a whole is malformed); ``cause`` is the underlying
    typed error.
    """

    def __init__(self, reason: str, index: int | None = None,
                 cause: Exception | None = None):
        self.index = index
        self.cause = cause
        prefix = f"transaction {index}: " if index is not None else ""
        super().__init__(f"block rejected: {prefix}{reason}")
