"""The aggregation web server: authenticated shout ingestion, the public feed
(cursor-paginated, with an optional event stream), session browsing,
screencast attachment, validation and stats endpoints, and the dashboard's
static bundle.

Reads are public; every write requires a bearer token. All journal writes
funnel through the store's single-writer lock, so the service must run as
exactly one instance per journal.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import mimetypes
import threading
import time
import urllib.parse
from collections import defaultdict, deque
from dataclasses import dataclass
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from queue import Empty, Full, Queue

from . import analytics
from .errors import (
    AlreadyDecided,
    DuplicateIdemKey,
    EmptyShout,
    TooLong,
    UnknownDeveloper,
    UnknownToken,
)
from .model import ORIGINS, Session, Shout, TimeslotConfig, normalize_shout_text, summarize_session
from .sessions import SessionService
from .store import MAX_FUTURE_SKEW, Store
from .timeutil import UTC, fmt_ts, now_utc, parse_ts
from .validation import ValidationEngine

logger = logging.getLogger(__name__)

DEFAULT_FEED_LIMIT = 50
MAX_FEED_LIMIT = 500
EPOCH = datetime(1970, 1, 1, tzinfo=UTC)


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.status = status
        self.code = code
        self.detail = detail


class RateLimiter:
    """Sliding one-minute window per developer."""

    def __init__(self, per_minute: int):
        self.per_minute = per_minute
        self._hits: dict[str, deque] = defaultdict(deque)
        self._lock = threading.Lock()

    def allow(self, key: str, now: float) -> bool:
        if self.per_minute <= 0:
            return True
        with self._lock:
            hits = self._hits[key]
            while hits and now - hits[0] > 60.0:
                hits.popleft()
            if len(hits) >= self.per_minute:
                return False
            hits.append(now)
            return True


class FeedBroker:
    """Fan-out of accepted feed entries to event-stream subscribers."""

    def __init__(self, queue_size: int = 256):
        self._queue_size = queue_size
        self._subs: set[Queue] = set()
        self._lock = threading.Lock()

    def subscribe(self) -> Queue:
        q: Queue = Queue(maxsize=self._queue_size)
        with self._lock:
            self._subs.add(q)
        return q

    def unsubscribe(self, q: Queue) -> None:
        with self._lock:
            self._subs.discard(q)

    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def publish(self, entry: dict) -> None:
        with self._lock:
            subs = list(self._subs)
        for q in subs:
            try:
                q.put_nowait(entry)
            except Full:
                pass  # slow consumer loses events; the feed endpoint has them all


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8337
    data_dir: Path = Path("./aa-data")
    timeslot_min: int = 15
    session_gap_min: int = 60
    rate_limit_per_min: int = 60
    scan_interval_s: float = 60.0
    base_url: str = ""
    static_dir: Path | None = None
    smtp_host: str | None = None
    smtp_port: int = 25
    smtp_sender: str = "aa@localhost"
    recover: bool = False
    fsync: bool = True

    @property
    def journal_path(self) -> Path:
        return Path(self.data_dir) / "journal.jsonl"


def _b64(text: str) -> str:
    return base64.urlsafe_b64encode(text.encode()).decode().rstrip("=")


def _unb64(token: str) -> str:
    pad = "=" * (-len(token) % 4)
    return base64.urlsafe_b64decode(token + pad).decode()


def encode_cursor(last_id: int) -> str:
    return _b64(f"v1:{last_id}")


def decode_cursor(cursor: str) -> int:
    try:
        version, raw = _unb64(cursor).split(":", 1)
        if version != "v1":
            raise ValueError(version)
        return int(raw)
    except (ValueError, binascii.Error, UnicodeDecodeError):
        raise ApiError(400, "bad_cursor", "cursor is not from this server") from None


class App:
    """Endpoint logic, kept separate from HTTP plumbing for direct testing."""

    def __init__(self, store: Store, cfg: TimeslotConfig, config: ServerConfig,
                 engine: ValidationEngine, sessions: SessionService):
        self.store = store
        self.cfg = cfg
        self.config = config
        self.engine = engine
        self.sessions = sessions
        self.broker = FeedBroker()
        self.limiter = RateLimiter(config.rate_limit_per_min)
        self.started_at = time.monotonic()

    # -- serialization ------------------------------------------------------

    def _feed_entry(self, shout: Shout) -> dict:
        return {
            "id": shout.id,
            "server_ts": fmt_ts(shout.server_ts),
            "client_ts": fmt_ts(shout.client_ts),
            "author": shout.author,
            "text": shout.text,
            "session_id": self.sessions.session_id_of_shout(shout),
        }

    @staticmethod
    def _shout_json(shout: Shout) -> dict:
        return {
            "id": shout.id,
            "text": shout.text,
            "client_ts": fmt_ts(shout.client_ts),
            "server_ts": fmt_ts(shout.server_ts),
            "origin": shout.origin,
        }

    @staticmethod
    def _session_summary_json(session: Session) -> dict:
        return {
            "session_id": session.session_id,
            "author": session.author,
            "shout_count": len(session.shouts),
            "started_at": fmt_ts(session.started_at),
            "ended_at": fmt_ts(session.ended_at),
            "duration_s": session.duration_s,
            "screencast_url": session.screencast_url,
            "validation_state": session.validation_state,
        }

    def _session_detail_json(self, session: Session) -> dict:
        out = self._session_summary_json(session)
        out["shouts"] = [self._shout_json(s) for s in session.shouts]
        out["mean_intershout_gap_s"] = summarize_session(session).mean_intershout_gap_s
        assignment = self.store.assignment_for_session(session.session_id)
        out["validated_by"] = assignment.validator if assignment and assignment.decided else None
        out["validation_comment"] = assignment.comment if assignment and assignment.decided else None
        return out

    @staticmethod
    def _assignment_json(a) -> dict:
        return {
            "token": a.token,
            "session_id": a.session_id,
            "session_author": a.session_author,
            "validator": a.validator,
            "assigned_at": fmt_ts(a.assigned_at),
            "verdict": a.verdict,
            "comment": a.comment,
            "decided_at": fmt_ts(a.decided_at) if a.decided_at else None,
        }

    # -- auth ----------------------------------------------------------------

    def _authenticate(self, token: str | None):
        hit = self.store.developer_by_token(token or "")
        if hit is None:
            raise ApiError(401, "unauthorized", "unknown or revoked token")
        return hit

    # -- endpoints -----------------------------------------------------------

    def health(self) -> dict:
        return {
            "status": "ok",
            "journal_seq": self.store.last_seq,
            "uptime_s": int(time.monotonic() - self.started_at),
        }

    def post_shout(self, body: dict) -> dict:
        dev, scope = self._authenticate(body.get("auth_token"))
        if not self.limiter.allow(dev.nick, time.monotonic()):
            raise ApiError(429, "rate_limited", "shout rate limit exceeded")

        text = body.get("text")
        client_id = body.get("client_id")
        client_seq = body.get("seq")
        if not isinstance(text, str):
            raise ApiError(400, "bad_request", "text must be a string")
        if not isinstance(client_id, str) or not client_id:
            raise ApiError(400, "bad_request", "client_id must be a non-empty string")
        if not isinstance(client_seq, int) or isinstance(client_seq, bool) or client_seq < 0:
            raise ApiError(400, "bad_request", "seq must be a non-negative integer")
        raw_ts = body.get("client_ts")
        if not isinstance(raw_ts, str):
            raise ApiError(400, "bad_request", "client_ts must be an ISO-8601 string")
        try:
            client_ts = parse_ts(raw_ts)
        except ValueError:
            raise ApiError(400, "bad_request", f"unparseable client_ts {raw_ts!r}") from None

        if scope == "relay":
            origin = "bot"
        else:
            origin = body.get("origin", "http")
            if origin not in ORIGINS:
                raise ApiError(400, "bad_request", f"origin must be one of {ORIGINS}")

        try:
            text = normalize_shout_text(text)
        except EmptyShout:
            raise ApiError(422, "empty_shout", "shout text is empty") from None
        except TooLong as exc:
            raise ApiError(422, "too_long", str(exc)) from None
        if client_ts > now_utc() + MAX_FUTURE_SKEW:
            raise ApiError(422, "future_client_ts", "client_ts is more than 24h in the future")

        try:
            shout = self.store.append_shout(
                author=dev.nick, text=text, client_ts=client_ts,
                origin=origin, client_id=client_id, client_seq=client_seq,
            )
        except DuplicateIdemKey as exc:
            original = self.store.shout_by_id(exc.existing_id)
            return {"id": original.id, "server_ts": fmt_ts(original.server_ts), "accepted": False}
        self.broker.publish(self._feed_entry(shout))
        return {"id": shout.id, "server_ts": fmt_ts(shout.server_ts), "accepted": True}

    def feed(self, params: dict) -> dict:
        author = params.get("author")
        since = self._parse_ts_param(params, "since")
        limit = DEFAULT_FEED_LIMIT
        if "limit" in params:
            try:
                limit = int(params["limit"])
            except ValueError:
                raise ApiError(400, "bad_request", "limit must be an integer") from None
            if not 1 <= limit <= MAX_FEED_LIMIT:
                raise ApiError(400, "bad_request", f"limit must be in [1, {MAX_FEED_LIMIT}]")
        rows = self.store.query_shouts(author=author or None, since=since, order="newest_first")
        if "cursor" in params:
            before_id = decode_cursor(params["cursor"])
            rows = [s for s in rows if s.id < before_id]
        page, rest = rows[:limit], rows[limit:]
        return {
            "entries": [self._feed_entry(s) for s in page],
            "next_cursor": encode_cursor(page[-1].id) if rest else None,
        }

    def list_sessions(self, params: dict) -> list[dict]:
        author = params.get("author") or None
        since = self._parse_ts_param(params, "from")
        until = self._parse_ts_param(params, "to")
        sessions = self.sessions.sessions_in_window(author, since, until)
        return [self._session_summary_json(s) for s in sessions]

    def session_detail(self, session_id: str) -> dict:
        session = self.sessions.session_by_id(session_id)
        if session is None:
            raise ApiError(404, "not_found", "unknown session id")
        return self._session_detail_json(session)

    def attach_screencast(self, session_id: str, body: dict) -> dict:
        dev, scope = self._authenticate(body.get("auth_token"))
        if scope != "full":
            raise ApiError(403, "forbidden", "relay tokens cannot attach screencasts")
        session = self.sessions.session_by_id(session_id)
        if session is None:
            raise ApiError(404, "not_found", "unknown session id")
        if session.author != dev.nick:
            raise ApiError(403, "forbidden", "only the session author may attach a screencast")
        url = body.get("url")
        if not isinstance(url, str):
            raise ApiError(422, "invalid_url", "url must be a string")
        parsed = urllib.parse.urlparse(url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ApiError(422, "invalid_url", "screencast url must be http(s)")
        self.store.attach_screencast(session_id, url, dev.nick)
        session.screencast_url = url
        return self._session_detail_json(session)

    def pending_validations(self, params: dict) -> list[dict]:
        dev, scope = self._authenticate(params.get("auth_token"))
        if scope != "full":
            raise ApiError(403, "forbidden", "relay tokens cannot review validations")
        out = []
        for a in self.engine.pending_for(dev.nick):
            row = self._assignment_json(a)
            row["url"] = self.engine.validation_url(a.token)
            out.append(row)
        return out

    def validation_detail(self, token: str) -> dict:
        assignment = self.store.assignment_by_token(token)
        if assignment is None:
            raise ApiError(404, "not_found", "unknown validation token")
        session = self.sessions.session_by_id(assignment.session_id)
        return {
            "assignment": self._assignment_json(assignment),
            "session": self._session_detail_json(session) if session else None,
        }

    def post_verdict(self, token: str, body: dict) -> dict:
        verdict = body.get("verdict")
        comment = body.get("comment")
        if comment is not None and not isinstance(comment, str):
            raise ApiError(422, "invalid_comment", "comment must be a string")
        if not isinstance(verdict, str) or verdict not in ("valid", "invalid"):
            # unknown token wins over a malformed verdict: 404 before 422
            if self.store.assignment_by_token(token) is None:
                raise ApiError(404, "not_found", "unknown validation token")
            raise ApiError(422, "invalid_verdict", "verdict must be 'valid' or 'invalid'")
        try:
            assignment = self.engine.record_verdict(token, verdict, comment)
        except UnknownToken:
            raise ApiError(404, "not_found", "unknown validation token") from None
        except AlreadyDecided as exc:
            raise ApiError(409, "already_decided", str(exc)) from None
        except ValueError as exc:
            raise ApiError(422, "invalid_comment", str(exc)) from None
        return self._assignment_json(assignment)

    def developer_stats(self, nick: str, params: dict) -> dict:
        window_from = self._parse_ts_param(params, "from") or EPOCH
        window_to = self._parse_ts_param(params, "to") or now_utc()
        try:
            stats = analytics.compute_stats(self.store, self.sessions, nick, window_from, window_to)
        except UnknownDeveloper:
            raise ApiError(404, "unknown_developer", f"no developer named {nick!r}") from None
        return self._stats_json(stats)

    def team_stats(self, params: dict) -> dict:
        window_from = self._parse_ts_param(params, "from") or EPOCH
        window_to = self._parse_ts_param(params, "to") or now_utc()
        report = analytics.team_report(self.store, self.sessions, window_from, window_to)
        return {
            "window_from": fmt_ts(report.window_from),
            "window_to": fmt_ts(report.window_to),
            "compliance_hours": report.compliance_hours,
            "team": report.team,
            "per_developer": {
                nick: {
                    "stats": self._stats_json(dev.stats),
                    "non_compliant_days_single": dev.non_compliant_days_single,
                    "non_compliant_days_cumulative": dev.non_compliant_days_cumulative,
                }
                for nick, dev in report.per_developer.items()
            },
        }

    @staticmethod
    def _stats_json(stats: analytics.DeveloperStats) -> dict:
        return {
            "nick": stats.nick,
            "window_from": fmt_ts(stats.window_from),
            "window_to": fmt_ts(stats.window_to),
            "sessions_count": stats.sessions_count,
            "total_session_seconds": stats.total_session_seconds,
            "shouts_count": stats.shouts_count,
            "mean_session_duration_s": stats.mean_session_duration_s,
            "mean_shouts_per_session": stats.mean_shouts_per_session,
            "intershout_gap_histogram": stats.intershout_gap_histogram,
            "days_with_sessions": stats.days_with_sessions,
            "validation": stats.validation,
        }

    @staticmethod
    def _parse_ts_param(params: dict, name: str) -> datetime | None:
        raw = params.get(name)
        if not raw:
            return None
        try:
            return parse_ts(raw)
        except ValueError:
            raise ApiError(400, "bad_timestamp", f"unparseable {name} {raw!r}") from None


class AAHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, handler, app: App):
        super().__init__(address, handler)
        self.app = app
        self.stopping = threading.Event()


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: AAHTTPServer

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, obj) -> None:
        blob = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def _read_body(self) -> dict:
        length = self.headers.get("Content-Length")
        try:
            size = int(length or 0)
        except ValueError:
            raise ApiError(400, "bad_request", "bad Content-Length") from None
        raw = self.rfile.read(size) if size else b""
        if not raw:
            raise ApiError(400, "bad_request", "missing request body")
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ApiError(400, "bad_request", "body is not valid JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "bad_request", "body must be a JSON object")
        auth = self.headers.get("Authorization", "")
        if auth.startswith("Bearer ") and "auth_token" not in body:
            body["auth_token"] = auth[len("Bearer "):]
        return body

    def _params(self) -> dict:
        query = urllib.parse.urlparse(self.path).query
        pairs = urllib.parse.parse_qs(query, keep_blank_values=False)
        params = {k: v[0] for k, v in pairs.items()}
        auth = self.headers.get("Authorization", "")
        if auth.startswith("Bearer ") and "auth_token" not in params:
            params["auth_token"] = auth[len("Bearer "):]
        return params

    def _route(self) -> list[str]:
        path = urllib.parse.urlparse(self.path).path
        return [urllib.parse.unquote(part) for part in path.split("/") if part]

    # -- methods ---------------------------------------------------------------

    def do_GET(self):
        try:
            self._dispatch_get()
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.code, "detail": exc.detail})
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception:
            logger.exception("GET %s failed", self.path)
            self._send_json(500, {"error": "internal", "detail": "unexpected server error"})

    def do_POST(self):
        try:
            self._dispatch_post()
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.code, "detail": exc.detail})
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception:
            logger.exception("POST %s failed", self.path)
            self._send_json(500, {"error": "internal", "detail": "unexpected server error"})

    def _dispatch_get(self):
        app = self.server.app
        parts = self._route()
        params = self._params()
        if parts[:1] != ["api"]:
            self._serve_static(parts)
            return
        rest = parts[1:]
        if rest == ["health"]:
            self._send_json(200, app.health())
        elif rest == ["feed"]:
            self._send_json(200, app.feed(params))
        elif rest == ["feed", "stream"]:
            self._serve_stream()
        elif rest == ["sessions"]:
            self._send_json(200, app.list_sessions(params))
        elif len(rest) == 2 and rest[0] == "sessions":
            self._send_json(200, app.session_detail(rest[1]))
        elif rest == ["validations", "pending"]:
            self._send_json(200, app.pending_validations(params))
        elif len(rest) == 2 and rest[0] == "validations":
            self._send_json(200, app.validation_detail(rest[1]))
        elif len(rest) == 3 and rest[:2] == ["stats", "developer"]:
            self._send_json(200, app.developer_stats(rest[2], params))
        elif rest == ["stats", "team"]:
            self._send_json(200, app.team_stats(params))
        else:
            raise ApiError(404, "not_found", "no such endpoint")

    def _dispatch_post(self):
        app = self.server.app
        parts = self._route()
        if parts[:1] != ["api"]:
            raise ApiError(404, "not_found", "no such endpoint")
        rest = parts[1:]
        body = self._read_body()
        if rest == ["shouts"]:
            self._send_json(200, app.post_shout(body))
        elif len(rest) == 3 and rest[0] == "sessions" and rest[2] == "screencast":
            self._send_json(200, app.attach_screencast(rest[1], body))
        elif len(rest) == 2 and rest[0] == "validations":
            self._send_json(200, app.post_verdict(rest[1], body))
        else:
            raise ApiError(404, "not_found", "no such endpoint")

    # -- event stream ------------------------------------------------------------

    def _serve_stream(self):
        app = self.server.app
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(b"retry: 3000\n\n")
        self.wfile.flush()
        q = app.broker.subscribe()
        idle = 0.0
        try:
            while not self.server.stopping.is_set():
                try:
                    entry = q.get(timeout=0.5)
                except Empty:
                    idle += 0.5
                    if idle >= 15.0:
                        self.wfile.write(b": ping\n\n")
                        self.wfile.flush()
                        idle = 0.0
                    continue
                idle = 0.0
                payload = json.dumps(entry, ensure_ascii=False)
                self.wfile.write(f"id: {entry['id']}\nevent: shout\ndata: {payload}\n\n".encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            app.broker.unsubscribe(q)

    # -- static assets --------------------------------------------------------------

    def _serve_static(self, parts: list[str]):
        root = self.server.app.config.static_dir
        if root is None:
            if not parts:
                self._send_json(200, {"service": "aa", "feed": "/api/feed"})
                return
            raise ApiError(404, "not_found", "static assets not configured")
        root = Path(root).resolve()
        target = (root / "/".join(parts)).resolve() if parts else root / "index.html"
        if not str(target).startswith(str(root)):
            raise ApiError(404, "not_found", "no such file")
        if not target.is_file():
            target = root / "index.html"  # SPA routes fall back to the shell
            if not target.is_file():
                raise ApiError(404, "not_found", "no such file")
        blob = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)


@dataclass
class ServerHandle:
    app: App
    httpd: AAHTTPServer
    thread: threading.Thread

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self.httpd.stopping.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        self.thread.join(timeout=10)
        self.app.store.close()


def build_app(config: ServerConfig, *, store: Store | None = None,
              engine_kwargs: dict | None = None) -> App:
    cfg = TimeslotConfig(timeslot_min=config.timeslot_min, session_gap_min=config.session_gap_min)
    if store is None:
        store = Store(config.journal_path, recover=config.recover, fsync=config.fsync)
    sessions = SessionService(store, cfg)
    from .validation import DispatchingNotifier, EmailNotifier

    email = EmailNotifier(config.smtp_host, config.smtp_port, config.smtp_sender) \
        if config.smtp_host else None
    kwargs = dict(engine_kwargs or {})
    kwargs.setdefault("notifier", DispatchingNotifier(email=email))
    base_url = config.base_url or f"http://{config.host}:{config.port}"
    engine = ValidationEngine(store, sessions, cfg, base_url=base_url, **kwargs)
    return App(store, cfg, config, engine, sessions)


def start_in_thread(app: App, host: str = "127.0.0.1", port: int = 0) -> ServerHandle:
    httpd = AAHTTPServer((host, port), Handler, app)
    thread = threading.Thread(target=httpd.serve_forever, name="aa-http", daemon=True)
    thread.start()
    return ServerHandle(app=app, httpd=httpd, thread=thread)


def run_scan_worker(app: App, stop: threading.Event, interval_s: float) -> threading.Thread:
    """Background loop assigning validators to freshly closed sessions."""

    def loop():
        while not stop.wait(interval_s):
            try:
                created = app.engine.close_and_assign()
                if created:
                    logger.info("assigned %d validators", len(created))
            except Exception:
                logger.exception("validation scan failed")

    thread = threading.Thread(target=loop, name="aa-scan", daemon=True)
    thread.start()
    return thread
