"""Shared exception types."""

from __future__ import annotations


class AAError(Exception):
    """Base class for all domain errors."""


class EmptyShout(AAError):
    """Shout text is empty after normalization."""


class TooLong(AAError):
    """Shout text exceeds the maximum length (never truncated silently)."""

    def __init__(self, length: int, limit: int):
        super().__init__(f"shout text is {length} chars, limit is {limit}")
        self.length = length
        self.limit = limit


class MixedAuthors(AAError):
    """Session grouping was handed shouts from more than one author."""


class DuplicateIdemKey(AAError):
    """A shout with this (client_id, seq) idempotency key was already accepted."""

    def __init__(self, existing_id: int):
        super().__init__(f"duplicate idempotency key, original shout id {existing_id}")
        self.existing_id = existing_id


class DuplicateAssignment(AAError):
    """The session already has a validation assignment."""


class CorruptJournal(AAError):
    """Journal replay hit a record that cannot be applied."""

    def __init__(self, message: str, line_no: int, last_seq: int):
        super().__init__(f"{message} (line {line_no}, last complete seq {last_seq})")
        self.line_no = line_no
        self.last_seq = last_seq


class StorageFailure(AAError):
    """The journal could not be written."""


class NoEligibleValidator(AAError):
    """No active developer other than the author exists."""


class UnknownDeveloper(AAError):
    """No developer registered under that nickname."""


class UnknownToken(AAError):
    """No validation assignment carries that token."""


class AlreadyDecided(AAError):
    """The assignment's verdict is immutable once set."""


class DeliveryFailed(AAError):
    """A notification transport failed to deliver."""


class MissingConfig(AAError):
    """Client invoked without server URL or auth token configured."""


class TransportError(AAError):
    """The server could not be reached (retryable)."""
