"""The `aa-server` command: serve, admin provisioning, and the report table.

Admin subcommands write the journal directly, so run them while the server
is down (the journal is single-writer).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import threading
from pathlib import Path

from . import analytics
from .errors import CorruptJournal
from .model import Developer, TimeslotConfig, valid_nick
from .sessions import SessionService
from .server import ServerConfig, build_app, run_scan_worker, start_in_thread
from .store import Store
from .timeutil import now_utc, parse_ts

logger = logging.getLogger(__name__)
EPOCH = "1970-01-01T00:00:00Z"


def _config_from(args) -> ServerConfig:
    return ServerConfig(
        host=args.host,
        port=args.port,
        data_dir=Path(args.data_dir),
        timeslot_min=args.timeslot,
        session_gap_min=args.session_gap,
        rate_limit_per_min=args.rate_limit,
        scan_interval_s=args.scan_interval,
        base_url=args.base_url or "",
        static_dir=Path(args.static_dir) if args.static_dir else None,
        smtp_host=args.smtp_host,
        smtp_port=args.smtp_port,
        smtp_sender=args.smtp_sender,
        recover=args.recover,
    )


def cmd_serve(args) -> int:
    config = _config_from(args)
    try:
        app = build_app(config)
    except CorruptJournal as exc:
        print(f"error: corrupt journal: {exc}\n"
              f"rerun with --recover to drop a torn final record", file=sys.stderr)
        return 1
    handle = start_in_thread(app, config.host, config.port)
    stop = threading.Event()
    if config.scan_interval_s > 0:
        run_scan_worker(app, stop, config.scan_interval_s)
    host, port = handle.httpd.server_address[:2]
    print(f"serving on http://{host}:{port} (journal seq {app.store.last_seq})", flush=True)
    try:
        handle.thread.join()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        stop.set()
        handle.stop()
    return 0


def _open_store(args) -> Store:
    return Store(Path(args.data_dir) / "journal.jsonl", recover=getattr(args, "recover", False))


def cmd_add_dev(args) -> int:
    if not valid_nick(args.nick):
        print(f"error: nick must match [a-z0-9_]{{2,32}}", file=sys.stderr)
        return 1
    store = _open_store(args)
    try:
        existing = store.developer(args.nick)
        aliases: set[tuple[str, str]] = set(existing.chat_aliases) if existing else set()
        for alias_pair in args.alias or []:
            network, _, alias = alias_pair.partition(":")
            if not network or not alias:
                print(f"error: --alias takes network:alias, got {alias_pair!r}", file=sys.stderr)
                return 1
            aliases.add((network, alias))
        # an alias pair may belong to at most one developer
        for other in store.developers():
            if other.nick != args.nick and aliases & other.chat_aliases:
                clash = sorted(aliases & other.chat_aliases)
                print(f"error: alias {clash[0]} already mapped to {other.nick}", file=sys.stderr)
                return 1
        dev = Developer(
            nick=args.nick,
            auth_token=args.token or (existing.auth_token if existing else secrets.token_urlsafe(24)),
            relay_token=args.relay_token or (existing.relay_token if existing else secrets.token_urlsafe(24)),
            chat_aliases=frozenset(aliases),
            notify_address=args.notify or (existing.notify_address if existing else None),
            active=True,
        )
        store.upsert_developer(dev)
        print(json.dumps({
            "nick": dev.nick,
            "auth_token": dev.auth_token,
            "relay_token": dev.relay_token,
            "notify_address": dev.notify_address,
            "chat_aliases": sorted(list(p) for p in dev.chat_aliases),
        }, indent=2))
    finally:
        store.close()
    return 0


def cmd_list_devs(args) -> int:
    store = _open_store(args)
    try:
        for dev in store.developers():
            flags = "active" if dev.active else "inactive"
            aliases = ", ".join(f"{n}:{a}" for n, a in sorted(dev.chat_aliases)) or "-"
            print(f"{dev.nick:<16} {flags:<9} notify={dev.notify_address or '-'} aliases={aliases}")
    finally:
        store.close()
    return 0


def cmd_deactivate(args) -> int:
    store = _open_store(args)
    try:
        dev = store.developer(args.nick)
        if dev is None:
            print(f"error: unknown developer {args.nick!r}", file=sys.stderr)
            return 1
        store.upsert_developer(Developer(
            nick=dev.nick, auth_token=dev.auth_token, relay_token=dev.relay_token,
            chat_aliases=dev.chat_aliases, notify_address=dev.notify_address, active=False,
        ))
        print(f"{dev.nick} deactivated")
    finally:
        store.close()
    return 0


def cmd_report(args) -> int:
    store = _open_store(args)
    try:
        cfg = TimeslotConfig(timeslot_min=args.timeslot, session_gap_min=args.session_gap)
        sessions = SessionService(store, cfg)
        window_from = parse_ts(args.from_ts or EPOCH)
        window_to = parse_ts(args.to_ts) if args.to_ts else now_utc()
        report = analytics.team_report(
            store, sessions, window_from, window_to,
            compliance_hours=args.compliance_hours,
        )
        print(analytics.render_report_text(report))
    finally:
        store.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aa-server", description="micrologging aggregation server")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--data-dir", default=os.environ.get("AA_DATA_DIR", "./aa-data"))

    p = sub.add_parser("serve", help="run the HTTP service")
    common(p)
    p.add_argument("--host", default=os.environ.get("AA_LISTEN_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("AA_LISTEN_PORT", "8337")))
    p.add_argument("--timeslot", type=int,
                   default=int(os.environ.get("AA_TIMESLOT", "15")), help="alert period, minutes")
    p.add_argument("--session-gap", type=int,
                   default=int(os.environ.get("AA_SESSION_GAP", "60")),
                   help="inactivity threshold separating sessions, minutes")
    p.add_argument("--rate-limit", type=int,
                   default=int(os.environ.get("AA_RATE_LIMIT", "60")),
                   help="shouts/minute/developer (0 = off)")
    p.add_argument("--scan-interval", type=float, default=60.0,
                   help="validator assignment scan period, seconds (0 = off)")
    p.add_argument("--base-url", default=os.environ.get("AA_BASE_URL"),
                   help="public URL used in validation links")
    p.add_argument("--static-dir", default=os.environ.get("AA_STATIC_DIR"),
                   help="dashboard bundle to serve under /")
    p.add_argument("--smtp-host", default=None)
    p.add_argument("--smtp-port", type=int, default=25)
    p.add_argument("--smtp-sender", default="aa@localhost")
    p.add_argument("--recover", action="store_true",
                   help="drop a torn final journal record instead of refusing to start")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("admin", help="developer provisioning (server must be down)")
    admin_sub = p.add_subparsers(dest="admin_command", required=True)

    pa = admin_sub.add_parser("add-dev", help="create or update a developer")
    common(pa)
    pa.add_argument("nick")
    pa.add_argument("--token", help="explicit auth token (generated when omitted)")
    pa.add_argument("--relay-token", help="explicit chat-relay token (generated when omitted)")
    pa.add_argument("--notify", help="email or webhook URL for validation requests")
    pa.add_argument("--alias", action="append", help="chat alias as network:nick (repeatable)")
    pa.set_defaults(func=cmd_add_dev)

    pa = admin_sub.add_parser("list-devs", help="list developers")
    common(pa)
    pa.set_defaults(func=cmd_list_devs)

    pa = admin_sub.add_parser("deactivate", help="revoke a developer's tokens")
    common(pa)
    pa.add_argument("nick")
    pa.set_defaults(func=cmd_deactivate)

    p = sub.add_parser("report", help="team activity and compliance table")
    common(p)
    p.add_argument("--from", dest="from_ts", help="window start, ISO-8601 (default epoch)")
    p.add_argument("--to", dest="to_ts", help="window end, ISO-8601 (default now)")
    p.add_argument("--timeslot", type=int, default=15)
    p.add_argument("--session-gap", type=int, default=60)
    p.add_argument("--compliance-hours", type=float, default=2.0)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
