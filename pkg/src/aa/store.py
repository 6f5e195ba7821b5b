"""Durable state: an append-only journal of records, replayed into in-memory
indexes on open. One JSON object per line, UTF-8, LF terminated, so the full
history stays human-auditable with standard tools.

Single-writer contract: all appends serialize through one lock; reads copy
references under the same lock. One process per journal file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from collections import defaultdict
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable

from .errors import (
    AlreadyDecided,
    CorruptJournal,
    DuplicateAssignment,
    DuplicateIdemKey,
    StorageFailure,
    UnknownToken,
)
from .model import (
    MAX_COMMENT_CHARS,
    MAX_SHOUT_CHARS,
    ORIGINS,
    VERDICTS,
    Developer,
    Shout,
    ValidationAssignment,
    valid_nick,
)
from .timeutil import fmt_ts, now_utc, parse_ts

logger = logging.getLogger(__name__)

JOURNAL_VERSION = 1
KINDS = ("shout", "developer_upsert", "screencast_attach", "validation_assign", "validation_verdict")

MAX_FUTURE_SKEW = timedelta(hours=24)


class Store:
    """Journal-backed store for shouts, developers, screencast links and
    validation records."""

    def __init__(
        self,
        journal_path: str | Path,
        *,
        recover: bool = False,
        fsync: bool = True,
        now_fn: Callable[[], datetime] = now_utc,
    ):
        self.journal_path = Path(journal_path)
        self._fsync = fsync
        self._now = now_fn
        self._lock = threading.RLock()

        self.last_seq = 0
        self.mutation = 0  # bumped on every applied record; cache invalidation hook
        self._shouts: list[Shout] = []
        self._shout_by_id: dict[int, Shout] = {}
        self._by_author: dict[str, list[Shout]] = defaultdict(list)
        self._idem: dict[tuple[str, int], int] = {}
        self._developers: dict[str, Developer] = {}
        self._tokens: dict[str, tuple[str, str]] = {}  # token -> (nick, scope)
        self._screencasts: dict[str, str] = {}
        self._assignments: dict[str, ValidationAssignment] = {}  # token keyed
        self._by_session: dict[str, str] = {}  # session_id -> token

        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        self._replay(recover=recover)
        self._fh = open(self.journal_path, "ab")

    def close(self) -> None:
        with self._lock:
            if self._fh and not self._fh.closed:
                self._fh.close()

    # -- journal plumbing ---------------------------------------------------

    def _replay(self, recover: bool) -> None:
        if not self.journal_path.exists():
            return
        raw = self.journal_path.read_bytes()
        if not raw:
            return
        lines = raw.splitlines(keepends=True)
        keep_bytes = 0
        for line_no, line in enumerate(lines, start=1):
            is_last = line_no == len(lines)
            torn = None
            if not line.endswith(b"\n"):
                torn = "unterminated record"
            else:
                try:
                    record = json.loads(line.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    torn = f"unreadable record: {exc}"
            if torn is not None:
                if is_last and recover:
                    logger.warning(
                        "dropping torn final journal record at line %d (%s); last complete seq %d",
                        line_no, torn, self.last_seq,
                    )
                    self._truncate_to(keep_bytes)
                    return
                raise CorruptJournal(torn, line_no, self.last_seq)
            self._apply(record, line_no)
            keep_bytes += len(line)

    def _truncate_to(self, size: int) -> None:
        with open(self.journal_path, "r+b") as fh:
            fh.truncate(size)

    def _apply(self, record: dict, line_no: int) -> None:
        """Validate and fold one journal record into the indexes. Raises
        CorruptJournal on anything a well-formed journal can never contain."""

        def bad(msg: str) -> CorruptJournal:
            return CorruptJournal(msg, line_no, self.last_seq)

        try:
            seq = record["seq"]
            kind = record["kind"]
            payload = record["payload"]
        except (KeyError, TypeError):
            raise bad("record missing seq/kind/payload") from None
        if not isinstance(seq, int) or seq <= self.last_seq:
            raise bad(f"seq {seq!r} not strictly increasing")
        if kind not in KINDS:
            raise bad(f"unknown record kind {kind!r}")

        try:
            if kind == "shout":
                shout = Shout(
                    id=payload["id"],
                    author=payload["author"],
                    text=payload["text"],
                    client_ts=parse_ts(payload["client_ts"]),
                    server_ts=parse_ts(payload["server_ts"]),
                    origin=payload["origin"],
                    client_id=payload["client_id"],
                    client_seq=payload["client_seq"],
                )
                if shout.idem_key in self._idem:
                    raise bad(f"duplicate idempotency key {shout.idem_key}")
                self._shouts.append(shout)
                self._shout_by_id[shout.id] = shout
                self._by_author[shout.author].append(shout)
                self._idem[shout.idem_key] = shout.id
            elif kind == "developer_upsert":
                dev = Developer(
                    nick=payload["nick"],
                    auth_token=payload["auth_token"],
                    relay_token=payload.get("relay_token"),
                    chat_aliases=frozenset(
                        (n, a) for n, a in payload.get("chat_aliases", [])
                    ),
                    notify_address=payload.get("notify_address"),
                    active=payload.get("active", True),
                )
                old = self._developers.get(dev.nick)
                if old is not None:
                    self._tokens.pop(old.auth_token, None)
                    if old.relay_token:
                        self._tokens.pop(old.relay_token, None)
                self._developers[dev.nick] = dev
                self._tokens[dev.auth_token] = (dev.nick, "full")
                if dev.relay_token:
                    self._tokens[dev.relay_token] = (dev.nick, "relay")
            elif kind == "screencast_attach":
                self._screencasts[payload["session_id"]] = payload["url"]
            elif kind == "validation_assign":
                session_id = payload["session_id"]
                if session_id in self._by_session:
                    raise bad(f"session {session_id} assigned twice")
                assignment = ValidationAssignment(
                    session_id=session_id,
                    session_author=payload["author"],
                    validator=payload["validator"],
                    token=payload["token"],
                    assigned_at=parse_ts(payload["assigned_at"]),
                )
                if assignment.token in self._assignments:
                    raise bad(f"validation token reused")
                self._assignments[assignment.token] = assignment
                self._by_session[session_id] = assignment.token
            elif kind == "validation_verdict":
                token = payload["token"]
                assignment = self._assignments.get(token)
                if assignment is None:
                    raise bad(f"verdict for unknown token")
                if assignment.decided:
                    raise bad(f"second verdict for one token")
                assignment.verdict = payload["verdict"]
                assignment.comment = payload.get("comment")
                assignment.decided_at = parse_ts(payload["decided_at"])
        except CorruptJournal:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise bad(f"malformed {kind} payload: {exc}") from None

        self.last_seq = seq
        self.mutation += 1

    def _append(self, kind: str, payload: dict) -> int:
        record = {
            "v": JOURNAL_VERSION,
            "seq": self.last_seq + 1,
            "kind": kind,
            "written_at": fmt_ts(self._now()),
            "payload": payload,
        }
        line = json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n"
        try:
            self._fh.write(line.encode("utf-8"))
            self._fh.flush()
            if self._fsync:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"journal write failed: {exc}") from exc
        self._apply(record, line_no=-1)
        return record["seq"]

    # -- writes ---------------------------------------------------------------

    def append_shout(
        self,
        *,
        author: str,
        text: str,
        client_ts: datetime,
        origin: str,
        client_id: str,
        client_seq: int,
    ) -> Shout:
        """Accept one normalized shout. Assigns the id (= journal seq) and a
        monotone server timestamp. Duplicates raise DuplicateIdemKey carrying
        the original id and leave the store untouched."""
        if origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}")
        if not text or len(text) > MAX_SHOUT_CHARS:
            raise ValueError("text must be normalized before append")
        if not client_id or client_seq < 0:
            raise ValueError("idempotency key needs a client_id and a non-negative seq")
        with self._lock:
            key = (client_id, client_seq)
            if key in self._idem:
                raise DuplicateIdemKey(self._idem[key])
            server_ts = self._now()
            if self._shouts and server_ts < self._shouts[-1].server_ts:
                server_ts = self._shouts[-1].server_ts
            payload = {
                "id": self.last_seq + 1,
                "author": author,
                "text": text,
                "client_ts": fmt_ts(client_ts),
                "server_ts": fmt_ts(server_ts),
                "origin": origin,
                "client_id": client_id,
                "client_seq": client_seq,
            }
            self._append("shout", payload)
            return self._shouts[-1]

    def upsert_developer(self, dev: Developer) -> None:
        if not valid_nick(dev.nick):
            raise ValueError(f"invalid nick {dev.nick!r}")
        if not dev.auth_token:
            raise ValueError("developer needs an auth token")
        with self._lock:
            self._append("developer_upsert", {
                "nick": dev.nick,
                "auth_token": dev.auth_token,
                "relay_token": dev.relay_token,
                "chat_aliases": sorted(list(pair) for pair in dev.chat_aliases),
                "notify_address": dev.notify_address,
                "active": dev.active,
            })

    def attach_screencast(self, session_id: str, url: str, author: str) -> None:
        with self._lock:
            self._append("screencast_attach", {
                "session_id": session_id,
                "url": url,
                "author": author,
            })

    def assign_validation(
        self, *, session_id: str, author: str, validator: str, token: str, assigned_at: datetime
    ) -> ValidationAssignment:
        """Journal an assignment; at most one per session, checked and written
        under the writer lock so concurrent scans cannot double-assign."""
        if validator == author:
            raise ValueError("validator must differ from the session author")
        with self._lock:
            if session_id in self._by_session:
                raise DuplicateAssignment(f"session {session_id} already assigned")
            self._append("validation_assign", {
                "session_id": session_id,
                "author": author,
                "validator": validator,
                "token": token,
                "assigned_at": fmt_ts(assigned_at),
            })
            return self._assignments[token]

    def record_verdict(
        self, token: str, verdict: str, comment: str | None, decided_at: datetime
    ) -> ValidationAssignment:
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        if comment is not None and len(comment) > MAX_COMMENT_CHARS:
            raise ValueError(f"comment exceeds {MAX_COMMENT_CHARS} chars")
        with self._lock:
            assignment = self._assignments.get(token)
            if assignment is None:
                raise UnknownToken(token)
            if assignment.decided:
                raise AlreadyDecided(f"token already decided as {assignment.verdict}")
            self._append("validation_verdict", {
                "token": token,
                "verdict": verdict,
                "comment": comment,
                "decided_at": fmt_ts(decided_at),
            })
            return assignment

    # -- reads ----------------------------------------------------------------

    def query_shouts(
        self,
        *,
        author: str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
        limit: int | None = None,
        order: str = "newest_first",
    ) -> list[Shout]:
        """Filter by author and client-timestamp window (inclusive bounds).
        newest_first orders by (server_ts, id) descending."""
        if limit is not None and limit < 1:
            raise ValueError("limit must be >= 1 when given")
        if order not in ("newest_first", "oldest_first"):
            raise ValueError(f"unknown order {order!r}")
        with self._lock:
            rows = list(self._by_author.get(author, ())) if author else list(self._shouts)
        if since is not None:
            rows = [s for s in rows if s.client_ts >= since]
        if until is not None:
            rows = [s for s in rows if s.client_ts <= until]
        rows.sort(key=lambda s: (s.server_ts, s.id), reverse=(order == "newest_first"))
        if limit is not None:
            rows = rows[:limit]
        return rows

    def shout_by_id(self, shout_id: int) -> Shout | None:
        with self._lock:
            return self._shout_by_id.get(shout_id)

    def all_shouts(self) -> list[Shout]:
        with self._lock:
            return list(self._shouts)

    def shout_count(self) -> int:
        with self._lock:
            return len(self._shouts)

    def authors(self) -> list[str]:
        with self._lock:
            return sorted(self._by_author)

    def shouts_for(self, author: str) -> list[Shout]:
        with self._lock:
            return list(self._by_author.get(author, ()))

    def developers(self) -> list[Developer]:
        with self._lock:
            return [self._developers[n] for n in sorted(self._developers)]

    def developer(self, nick: str) -> Developer | None:
        with self._lock:
            return self._developers.get(nick)

    def developer_by_token(self, token: str) -> tuple[Developer, str] | None:
        """Resolve a bearer token to (developer, scope); scope is 'full' or
        'relay'. Inactive developers resolve to None (revoked)."""
        if not token:
            return None
        with self._lock:
            hit = self._tokens.get(token)
            if hit is None:
                return None
            dev = self._developers[hit[0]]
            if not dev.active:
                return None
            return dev, hit[1]

    def screencast_for(self, session_id: str) -> str | None:
        with self._lock:
            return self._screencasts.get(session_id)

    def assignment_by_token(self, token: str) -> ValidationAssignment | None:
        with self._lock:
            return self._assignments.get(token)

    def assignment_for_session(self, session_id: str) -> ValidationAssignment | None:
        with self._lock:
            token = self._by_session.get(session_id)
            return self._assignments.get(token) if token else None

    def assignments_for_validator(
        self, validator: str, *, undecided_only: bool = True
    ) -> list[ValidationAssignment]:
        with self._lock:
            rows = [a for a in self._assignments.values() if a.validator == validator]
        if undecided_only:
            rows = [a for a in rows if not a.decided]
        rows.sort(key=lambda a: a.assigned_at)
        return rows

    def validation_state_for(self, session_id: str) -> str:
        assignment = self.assignment_for_session(session_id)
        if assignment is None:
            return "pending"
        return assignment.verdict if assignment.decided else "assigned"

    def idem_keys(self) -> set[tuple[str, int]]:
        with self._lock:
            return set(self._idem)

    # -- determinism hooks ------------------------------------------------------

    def snapshot(self) -> dict:
        """Canonical JSON-compatible dump of the full state; two stores built
        from the same journal produce identical snapshots."""
        with self._lock:
            return {
                "last_seq": self.last_seq,
                "shouts": [
                    {
                        "id": s.id, "author": s.author, "text": s.text,
                        "client_ts": fmt_ts(s.client_ts), "server_ts": fmt_ts(s.server_ts),
                        "origin": s.origin, "client_id": s.client_id, "client_seq": s.client_seq,
                    }
                    for s in self._shouts
                ],
                "developers": [
                    {
                        "nick": d.nick, "auth_token": d.auth_token, "relay_token": d.relay_token,
                        "chat_aliases": sorted(list(p) for p in d.chat_aliases),
                        "notify_address": d.notify_address, "active": d.active,
                    }
                    for d in self.developers()
                ],
                "screencasts": dict(sorted(self._screencasts.items())),
                "assignments": [
                    {
                        "session_id": a.session_id, "author": a.session_author,
                        "validator": a.validator, "token": a.token,
                        "assigned_at": fmt_ts(a.assigned_at), "verdict": a.verdict,
                        "comment": a.comment,
                        "decided_at": fmt_ts(a.decided_at) if a.decided_at else None,
                    }
                    for a in sorted(self._assignments.values(), key=lambda a: a.token)
                ],
            }

    def digest(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
