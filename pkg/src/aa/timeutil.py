"""UTC timestamp helpers. Everything in this codebase is tz-aware, seconds precision."""

from __future__ import annotations

from datetime import datetime, timezone

UTC = timezone.utc


def now_utc() -> datetime:
    return datetime.now(UTC).replace(microsecond=0)


def to_utc(dt: datetime) -> datetime:
    """Coerce to tz-aware UTC, truncated to whole seconds. Naive input is taken as UTC."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC).replace(microsecond=0)


def parse_ts(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; 'Z' suffix and offsets both accepted."""
    raw = value.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    return to_utc(datetime.fromisoformat(raw))


def fmt_ts(dt: datetime) -> str:
    return to_utc(dt).strftime("%Y-%m-%dT%H:%M:%SZ")
