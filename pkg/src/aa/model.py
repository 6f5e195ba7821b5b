"""Domain types and the pure algorithms: shout normalization, session grouping,
timeslot alert scheduling, session summaries.

All functions here are side-effect free and safe to call concurrently.
"""

from __future__ import annotations

import hashlib
import logging
import re
import unicodedata
from dataclasses import dataclass
from datetime import datetime, timedelta

from .errors import EmptyShout, MixedAuthors, TooLong
from .timeutil import to_utc

logger = logging.getLogger(__name__)

MAX_SHOUT_CHARS = 512
MAX_COMMENT_CHARS = 2000

# Proposed micrologging cadence band, in minutes. Values outside it are legal
# but logged as unusual.
PROPOSED_TIMESLOT_MIN = 5
PROPOSED_TIMESLOT_MAX = 15

NICK_RE = re.compile(r"^[a-z0-9_]{2,32}$")
ORIGINS = ("cli", "bot", "http", "ui")
VERDICTS = ("valid", "invalid")

# Reserved marker texts emitted by the client; the server stores them as
# ordinary shouts but uses them as explicit session boundaries.
SESSION_START_MARKER = "session: start"
SESSION_STOP_MARKER = "session: stop"

_WS_RUN = re.compile(r"\s+")


def normalize_shout_text(raw: str) -> str:
    """Canonical shout text: no control chars, single-spaced, stripped.

    Raises EmptyShout when nothing is left and TooLong past MAX_SHOUT_CHARS;
    over-long text is rejected, never truncated. Idempotent.
    """
    cleaned = "".join(
        ch for ch in raw if ch.isspace() or unicodedata.category(ch) != "Cc"
    )
    text = _WS_RUN.sub(" ", cleaned).strip()
    if not text:
        raise EmptyShout("shout text is empty after normalization")
    if len(text) > MAX_SHOUT_CHARS:
        raise TooLong(len(text), MAX_SHOUT_CHARS)
    return text


def valid_nick(nick: str) -> bool:
    return bool(NICK_RE.match(nick))


@dataclass(frozen=True, slots=True)
class Shout:
    """One microlog entry as accepted by the server."""

    id: int
    author: str
    text: str
    client_ts: datetime
    server_ts: datetime
    origin: str
    client_id: str
    client_seq: int

    @property
    def idem_key(self) -> tuple[str, int]:
        return (self.client_id, self.client_seq)


@dataclass(frozen=True, slots=True)
class Developer:
    """Team member identity. The relay token, when set, is only good for
    shout ingestion (chat-bot scope) and can be rotated independently."""

    nick: str
    auth_token: str
    relay_token: str | None = None
    chat_aliases: frozenset[tuple[str, str]] = frozenset()
    notify_address: str | None = None
    active: bool = True


@dataclass(frozen=True)
class TimeslotConfig:
    """Micrologging cadence (timeslot) and the inactivity threshold that
    separates sessions (session_gap). The gap must exceed the timeslot or
    every session would end before its next alert."""

    timeslot_min: int = 15
    session_gap_min: int = 60

    def __post_init__(self):
        if not 1 <= self.timeslot_min <= 120:
            raise ValueError(f"timeslot must be within [1, 120] minutes, got {self.timeslot_min}")
        if self.session_gap_min <= self.timeslot_min:
            raise ValueError(
                f"session_gap ({self.session_gap_min}m) must exceed timeslot ({self.timeslot_min}m)"
            )
        if not PROPOSED_TIMESLOT_MIN <= self.timeslot_min <= PROPOSED_TIMESLOT_MAX:
            logger.warning(
                "timeslot of %d minutes is outside the proposed %d-%d band",
                self.timeslot_min, PROPOSED_TIMESLOT_MIN, PROPOSED_TIMESLOT_MAX,
            )

    @property
    def timeslot(self) -> timedelta:
        return timedelta(minutes=self.timeslot_min)

    @property
    def session_gap(self) -> timedelta:
        return timedelta(minutes=self.session_gap_min)

    @property
    def outside_proposed_band(self) -> bool:
        return not PROPOSED_TIMESLOT_MIN <= self.timeslot_min <= PROPOSED_TIMESLOT_MAX


def session_id_for(author: str, first_shout_id: int) -> str:
    """Deterministic session identity: hash of (author, anchor shout id).
    Stable across regrouping as long as the session keeps its first shout."""
    digest = hashlib.sha256(f"{author}:{first_shout_id}".encode()).hexdigest()
    return digest[:16]


@dataclass(slots=True)
class Session:
    """A maximal run of one author's shouts with no gap above session_gap.
    screencast_url and validation_state are filled in by the service layer."""

    session_id: str
    author: str
    shouts: list[Shout]
    screencast_url: str | None = None
    validation_state: str = "pending"

    @property
    def shout_ids(self) -> list[int]:
        return [s.id for s in self.shouts]

    @property
    def started_at(self) -> datetime:
        return self.shouts[0].client_ts

    @property
    def ended_at(self) -> datetime:
        return self.shouts[-1].client_ts

    @property
    def duration_s(self) -> int:
        return int((self.ended_at - self.started_at).total_seconds())


@dataclass(frozen=True, slots=True)
class SessionSummary:
    shout_count: int
    duration_s: int
    mean_intershout_gap_s: float
    has_screencast: bool


def _sort_key(s: Shout) -> tuple[datetime, datetime, int]:
    return (s.client_ts, s.server_ts, s.id)


def group_sessions(
    shouts: list[Shout],
    cfg: TimeslotConfig,
    *,
    honor_markers: bool = True,
) -> list[Session]:
    """Partition one author's shouts into sessions.

    Shouts are sorted by (client_ts, server_ts, id); a new session starts
    wherever the client-time gap to the predecessor exceeds cfg.session_gap.
    With honor_markers, a "session: start" shout always opens a new session
    and a "session: stop" shout always closes one, regardless of gap.
    """
    if not shouts:
        return []
    authors = {s.author for s in shouts}
    if len(authors) > 1:
        raise MixedAuthors(f"expected one author, got {sorted(authors)}")

    ordered = sorted(shouts, key=_sort_key)
    runs: list[list[Shout]] = [[ordered[0]]]
    for prev, cur in zip(ordered, ordered[1:]):
        split = (cur.client_ts - prev.client_ts) > cfg.session_gap
        if honor_markers:
            split = split or cur.text == SESSION_START_MARKER or prev.text == SESSION_STOP_MARKER
        if split:
            runs.append([cur])
        else:
            runs[-1].append(cur)

    author = ordered[0].author
    return [
        Session(session_id=session_id_for(author, run[0].id), author=author, shouts=run)
        for run in runs
    ]


def next_alert(last_activity: datetime, cfg: TimeslotConfig, now: datetime) -> datetime:
    """Earliest last_activity + k*timeslot strictly after now (k >= 1).

    Skipping straight past missed boundaries means a long pause never causes
    an alert storm.
    """
    last_activity = to_utc(last_activity)
    now = to_utc(now)
    if last_activity > now:
        raise ValueError("last_activity must not be in the future")
    slot_s = int(cfg.timeslot.total_seconds())
    elapsed_s = int((now - last_activity).total_seconds())
    k = elapsed_s // slot_s + 1
    return last_activity + timedelta(seconds=k * slot_s)


def summarize_session(session: Session) -> SessionSummary:
    count = len(session.shouts)
    duration = session.duration_s
    mean_gap = duration / (count - 1) if count >= 2 else 0.0
    return SessionSummary(
        shout_count=count,
        duration_s=duration,
        mean_intershout_gap_s=mean_gap,
        has_screencast=session.screencast_url is not None,
    )


@dataclass(slots=True)
class ValidationAssignment:
    """Peer-review record for one session. The verdict is write-once."""

    session_id: str
    session_author: str
    validator: str
    token: str
    assigned_at: datetime
    verdict: str | None = None
    comment: str | None = None
    decided_at: datetime | None = None

    @property
    def decided(self) -> bool:
        return self.verdict is not None
