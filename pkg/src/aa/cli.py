"""The `aa` command: shout, push, session start/stop, status, log.

Exit codes: 0 ok; 1 push left entries behind; 2 empty shout text;
3 missing config; 4 session already active; 5 stop without an active session.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import client
from .errors import EmptyShout, MissingConfig, TooLong
from .model import TimeslotConfig
from .timeutil import fmt_ts

EXIT_OK = 0
EXIT_PUSH_INCOMPLETE = 1
EXIT_EMPTY = 2
EXIT_NO_CONFIG = 3
EXIT_DOUBLE_START = 4
EXIT_NO_SESSION = 5


def _home(args) -> Path:
    return client.client_home(args.home)


def _load(args) -> tuple[client.ClientConfig, client.ClientQueue]:
    home = _home(args)
    cfg = client.load_config(home)
    return cfg, client.ClientQueue(home / "queue.jsonl")


def cmd_init(args) -> int:
    cfg = client.init_config(_home(args), args.server, args.token, args.timeslot)
    print(f"configured for {cfg.server_url} (client_id {cfg.client_id})")
    return EXIT_OK


def cmd_shout(args) -> int:
    try:
        cfg, queue = _load(args)
    except MissingConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    text = " ".join(args.text)
    try:
        status, entry = client.shout(cfg, queue, text)
    except (EmptyShout, TooLong) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    home = _home(args)
    if client.load_session_state(home).active:
        client.touch_activity(home, entry.client_ts)
    print("sent" if status == "sent" else "queued (offline)")
    return EXIT_OK


def cmd_push(args) -> int:
    try:
        cfg, queue = _load(args)
    except MissingConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    result = client.push(cfg, queue)
    print(json.dumps({"sent": result.sent, "remaining": result.remaining}))
    for err in result.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_PUSH_INCOMPLETE if result.remaining else EXIT_OK


def cmd_session_start(args) -> int:
    try:
        cfg, queue = _load(args)
    except MissingConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    home = _home(args)
    try:
        state = client.start_session(cfg, queue, home, timeslot_min=args.timeslot)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOUBLE_START
    slot_cfg = TimeslotConfig(timeslot_min=state.timeslot_min)
    print(f"session started at {fmt_ts(state.started_at)}, "
          f"alerts every {state.timeslot_min} minutes (Ctrl-C detaches, "
          f"`aa session stop` ends the session)")
    try:
        client.run_alert_loop(home, slot_cfg)
    except KeyboardInterrupt:
        print("\nalert loop detached; session still active")
    return EXIT_OK


def cmd_session_stop(args) -> int:
    try:
        cfg, queue = _load(args)
    except MissingConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    try:
        client.stop_session(cfg, queue, _home(args))
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SESSION
    print("session stopped")
    return EXIT_OK


def cmd_status(args) -> int:
    home = _home(args)
    state = client.load_session_state(home)
    queue = client.ClientQueue(home / "queue.jsonl")
    depth = len(queue.queued())
    if state.active:
        print(f"session active since {fmt_ts(state.started_at)} "
              f"(timeslot {state.timeslot_min}m)")
    else:
        print("no session")
    print(f"queue: {depth} unsent")
    try:
        cfg = client.load_config(home)
    except MissingConfig:
        print("server: not configured")
        return EXIT_OK
    print(f"server: {'reachable' if client.server_reachable(cfg) else 'unreachable'} "
          f"({cfg.server_url})")
    return EXIT_OK


def cmd_log(args) -> int:
    home = _home(args)
    queue = client.ClientQueue(home / "queue.jsonl")
    for entry in queue.entries()[-args.n:]:
        print(f"{fmt_ts(entry.client_ts)}  [{entry.state:>8}]  {entry.text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aa", description="micrologging client")
    parser.add_argument("--home", help="config/queue directory (default ~/.config/aa, env AA_HOME)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write client configuration")
    p.add_argument("--server", required=True, help="server base URL")
    p.add_argument("--token", required=True, help="developer auth token")
    p.add_argument("--timeslot", type=int, default=15, help="alert period in minutes")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("shout", help="emit one microlog")
    p.add_argument("text", nargs="+")
    p.set_defaults(func=cmd_shout)

    p = sub.add_parser("push", help="send queued shouts")
    p.set_defaults(func=cmd_push)

    p = sub.add_parser("session", help="session markers and the alert loop")
    session_sub = p.add_subparsers(dest="session_command", required=True)
    ps = session_sub.add_parser("start", help="start a session (foreground alert loop)")
    ps.add_argument("--timeslot", type=int, help="alert period in minutes")
    ps.set_defaults(func=cmd_session_start)
    ps = session_sub.add_parser("stop", help="stop the active session")
    ps.set_defaults(func=cmd_session_stop)

    p = sub.add_parser("status", help="local session, queue and server state")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("log", help="print recent local shouts")
    p.add_argument("-n", type=int, default=10)
    p.set_defaults(func=cmd_log)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
