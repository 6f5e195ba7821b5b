"""Developer-side client: config, the persistent offline queue, transport,
and the shout/push/session operations behind the `aa` command.

The queue is an append-only journal in the same line format as the server
store; state changes are appended as marker records, never edits. Concurrent
invocations serialize on an advisory file lock.
"""

from __future__ import annotations

import fcntl
import json
import logging
import os
import secrets
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable

from .errors import MissingConfig, TransportError
from .model import (
    SESSION_START_MARKER,
    SESSION_STOP_MARKER,
    TimeslotConfig,
    next_alert,
    normalize_shout_text,
)
from .timeutil import fmt_ts, now_utc, parse_ts

logger = logging.getLogger(__name__)

DEFAULT_HOME = "~/.config/aa"
QUEUE_VERSION = 1


def client_home(override: str | None = None) -> Path:
    raw = override or os.environ.get("AA_HOME") or DEFAULT_HOME
    return Path(raw).expanduser()


@dataclass
class ClientConfig:
    server_url: str
    token: str
    client_id: str
    timeslot_min: int = 15

    @property
    def api(self) -> str:
        return self.server_url.rstrip("/")


def init_config(home: Path, server_url: str, token: str, timeslot_min: int = 15) -> ClientConfig:
    """Write config.json, generating the stable client_id on first run."""
    home.mkdir(parents=True, exist_ok=True)
    path = home / "config.json"
    existing = {}
    if path.exists():
        existing = json.loads(path.read_text())
    client_id = existing.get("client_id") or secrets.token_hex(8)
    cfg = {
        "server_url": server_url,
        "token": token,
        "client_id": client_id,
        "timeslot_min": timeslot_min,
    }
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return ClientConfig(**cfg)


def load_config(home: Path) -> ClientConfig:
    """File config overridden by AA_SERVER_URL / AA_TOKEN / AA_TIMESLOT."""
    path = home / "config.json"
    data = {}
    if path.exists():
        data = json.loads(path.read_text())
    server_url = os.environ.get("AA_SERVER_URL") or data.get("server_url")
    token = os.environ.get("AA_TOKEN") or data.get("token")
    if not server_url or not token:
        raise MissingConfig("server URL and token required; run `aa init` or set AA_SERVER_URL/AA_TOKEN")
    client_id = data.get("client_id")
    if not client_id:
        # env-only setup still needs a stable client identity for dedupe
        client_id = secrets.token_hex(8)
        home.mkdir(parents=True, exist_ok=True)
        data.update({"server_url": server_url, "token": token, "client_id": client_id})
        path.write_text(json.dumps(data, indent=2) + "\n")
    timeslot = int(os.environ.get("AA_TIMESLOT") or data.get("timeslot_min") or 15)
    return ClientConfig(server_url=server_url, token=token, client_id=client_id,
                        timeslot_min=timeslot)


# -- queue -------------------------------------------------------------------


@dataclass(slots=True)
class QueueEntry:
    seq: int
    text: str
    client_ts: datetime
    state: str = "queued"  # queued | pushed | rejected
    shout_id: int | None = None


class ClientQueue:
    """Ordered local store of shouts. Entries keep their local seq forever;
    pushed and rejected entries are retained for audit, never re-sent."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock_path = self.path.with_suffix(".lock")
        self._record_count: int | None = None

    def _load(self) -> dict[int, QueueEntry]:
        entries: dict[int, QueueEntry] = {}
        self._record_count = 0
        if not self.path.exists():
            return entries
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            self._record_count += 1
            kind, payload = record["kind"], record["payload"]
            if kind == "queued_shout":
                entries[payload["seq"]] = QueueEntry(
                    seq=payload["seq"],
                    text=payload["text"],
                    client_ts=parse_ts(payload["client_ts"]),
                )
            elif kind == "queue_mark":
                entry = entries.get(payload["seq"])
                if entry is not None:
                    entry.state = payload["state"]
                    entry.shout_id = payload.get("shout_id")
        return entries

    def _append(self, kind: str, payload: dict) -> None:
        if self._record_count is None:
            self._load()
        self._record_count += 1
        line = json.dumps(
            {"v": QUEUE_VERSION, "seq": self._record_count, "kind": kind,
             "written_at": fmt_ts(now_utc()), "payload": payload},
            ensure_ascii=False,
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def locked(self):
        """Advisory exclusive lock; hold it across read-modify-write spans."""
        return _FileLock(self._lock_path)

    def entries(self) -> list[QueueEntry]:
        return sorted(self._load().values(), key=lambda e: e.seq)

    def queued(self) -> list[QueueEntry]:
        return [e for e in self.entries() if e.state == "queued"]

    def enqueue(self, text: str, client_ts: datetime) -> QueueEntry:
        with self.locked():
            entries = self._load()
            seq = max(entries, default=-1) + 1
            self._append("queued_shout", {
                "seq": seq, "text": text, "client_ts": fmt_ts(client_ts),
            })
            return QueueEntry(seq=seq, text=text, client_ts=client_ts)

    def mark(self, seq: int, state: str, shout_id: int | None = None) -> None:
        self._append("queue_mark", {"seq": seq, "state": state, "shout_id": shout_id})


class _FileLock:
    def __init__(self, path: Path):
        self.path = path
        self._fh = None

    def __enter__(self):
        self._fh = open(self.path, "w")
        fcntl.flock(self._fh.fileno(), fcntl.LOCK_EX)
        return self

    def __exit__(self, *exc):
        fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
        self._fh.close()


# -- transport -----------------------------------------------------------------

Transport = Callable[[ClientConfig, QueueEntry], dict]


def http_transport(cfg: ClientConfig, entry: QueueEntry, timeout: float = 5.0) -> dict:
    """POST one queue entry; returns the server's JSON response. Network
    failures and 5xx/429 raise TransportError (retryable); other 4xx return
    an {"error": ...} payload (permanent rejection)."""
    body = json.dumps({
        "auth_token": cfg.token,
        "text": entry.text,
        "client_ts": fmt_ts(entry.client_ts),
        "client_id": cfg.client_id,
        "seq": entry.seq,
        "origin": "cli",
    }).encode("utf-8")
    req = urllib.request.Request(
        f"{cfg.api}/api/shouts", data=body,
        headers={"Content-Type": "application/json"}, method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        if exc.code >= 500 or exc.code == 429:
            raise TransportError(f"server busy ({exc.code})") from exc
        try:
            return json.loads(exc.read().decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            return {"error": f"http_{exc.code}"}
    except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
        raise TransportError(f"server unreachable: {exc}") from exc


def server_reachable(cfg: ClientConfig, timeout: float = 2.0) -> bool:
    try:
        with urllib.request.urlopen(f"{cfg.api}/api/health", timeout=timeout) as resp:
            return resp.status == 200
    except OSError:
        return False


# -- operations -------------------------------------------------------------------


@dataclass(slots=True)
class PushResult:
    sent: int = 0
    remaining: int = 0
    rejected: int = 0
    errors: list[str] = field(default_factory=list)


def push(cfg: ClientConfig, queue: ClientQueue, transport: Transport = http_transport) -> PushResult:
    """Send queued entries in seq order with their original timestamps and
    idempotency keys. Stops at the first transport failure so order is
    preserved; re-running never duplicates (server-side dedupe)."""
    result = PushResult()
    with queue.locked():
        pending = queue.queued()
        for i, entry in enumerate(pending):
            try:
                response = transport(cfg, entry)
            except TransportError as exc:
                result.errors.append(f"seq {entry.seq}: {exc}")
                result.remaining = len(pending) - i
                return result
            if "error" in response:
                queue.mark(entry.seq, "rejected")
                result.rejected += 1
                result.errors.append(f"seq {entry.seq}: rejected ({response['error']})")
                continue
            queue.mark(entry.seq, "pushed", shout_id=response.get("id"))
            result.sent += 1
    return result


def shout(
    cfg: ClientConfig,
    queue: ClientQueue,
    raw_text: str,
    *,
    client_ts: datetime | None = None,
    transport: Transport = http_transport,
) -> tuple[str, QueueEntry]:
    """Normalize, enqueue, then try to flush the queue. Returns ("sent"|"queued",
    entry); "sent" means this entry reached the server in this call."""
    text = normalize_shout_text(raw_text)
    entry = queue.enqueue(text, client_ts or now_utc())
    push(cfg, queue, transport)
    refreshed = {e.seq: e for e in queue.entries()}[entry.seq]
    return ("sent" if refreshed.state == "pushed" else "queued", refreshed)


# -- session state + alert loop ------------------------------------------------------


@dataclass(slots=True)
class SessionState:
    active: bool = False
    started_at: datetime | None = None
    timeslot_min: int = 15
    last_activity: datetime | None = None


def _state_path(home: Path) -> Path:
    return home / "session.json"


def load_session_state(home: Path) -> SessionState:
    path = _state_path(home)
    if not path.exists():
        return SessionState()
    data = json.loads(path.read_text())
    return SessionState(
        active=data.get("active", False),
        started_at=parse_ts(data["started_at"]) if data.get("started_at") else None,
        timeslot_min=data.get("timeslot_min", 15),
        last_activity=parse_ts(data["last_activity"]) if data.get("last_activity") else None,
    )


def save_session_state(home: Path, state: SessionState) -> None:
    home.mkdir(parents=True, exist_ok=True)
    _state_path(home).write_text(json.dumps({
        "active": state.active,
        "started_at": fmt_ts(state.started_at) if state.started_at else None,
        "timeslot_min": state.timeslot_min,
        "last_activity": fmt_ts(state.last_activity) if state.last_activity else None,
    }, indent=2) + "\n")


def touch_activity(home: Path, ts: datetime) -> None:
    state = load_session_state(home)
    state.last_activity = ts
    save_session_state(home, state)


def run_alert_loop(
    home: Path,
    cfg: TimeslotConfig,
    *,
    now_fn: Callable[[], datetime] = now_utc,
    sleep_fn: Callable[[float], None] = time.sleep,
    ring_fn: Callable[[datetime], None] | None = None,
    max_rings: int | None = None,
) -> int:
    """Foreground alert loop. The next boundary is computed from the latest
    activity known at (re)schedule time; a shout landing mid-wait does not
    move the already-scheduled alert. Exits when the session state file goes
    inactive. Returns the number of rings."""
    def ring(at: datetime):
        print(f"\a[aa] {at:%H:%M:%S} time to shout a microlog", flush=True)

    ring_fn = ring_fn or ring
    rings = 0
    while True:
        state = load_session_state(home)
        if not state.active:
            return rings
        anchor = state.last_activity or state.started_at or now_fn()
        target = next_alert(anchor, cfg, now_fn())
        while True:
            state = load_session_state(home)
            if not state.active:
                return rings
            now = now_fn()
            if now >= target:
                break
            sleep_fn(min((target - now).total_seconds(), 0.5))
        ring_fn(target)
        rings += 1
        if max_rings is not None and rings >= max_rings:
            return rings


def start_session(
    cfg: ClientConfig,
    queue: ClientQueue,
    home: Path,
    *,
    timeslot_min: int | None = None,
    transport: Transport = http_transport,
    now_fn: Callable[[], datetime] = now_utc,
) -> SessionState:
    """Emit the start marker and persist the active-session state. Raises
    RuntimeError if a session is already active."""
    state = load_session_state(home)
    if state.active:
        raise RuntimeError("a session is already active")
    started = now_fn()
    slot = timeslot_min or cfg.timeslot_min
    shout(cfg, queue, SESSION_START_MARKER, client_ts=started, transport=transport)
    state = SessionState(active=True, started_at=started, timeslot_min=slot,
                         last_activity=started)
    save_session_state(home, state)
    return state


def stop_session(
    cfg: ClientConfig,
    queue: ClientQueue,
    home: Path,
    *,
    transport: Transport = http_transport,
    now_fn: Callable[[], datetime] = now_utc,
) -> None:
    """Emit the stop marker and clear the active flag (the alert loop notices
    on its next wake). Raises RuntimeError when no session is active."""
    state = load_session_state(home)
    if not state.active:
        raise RuntimeError("no active session")
    shout(cfg, queue, SESSION_STOP_MARKER, client_ts=now_fn(), transport=transport)
    state.active = False
    save_session_state(home, state)
