"""IRC relay bot: watches configured channels and private messages for
"shout <text>" commands from mapped nicks and forwards them to the server
under each developer's relay credential.

Speaks the RFC 1459 core only (NICK/USER/JOIN/PRIVMSG/PING). Unacked
messages ride the same persistent queue as the CLI, one queue per mapped
developer, so a flaky server never loses accepted commands.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import socket
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .client import ClientConfig, ClientQueue, Transport, http_transport, push
from .errors import EmptyShout, TooLong
from .model import normalize_shout_text
from .timeutil import now_utc

logger = logging.getLogger(__name__)

RECONNECT_START_S = 1.0
RECONNECT_CAP_S = 300.0


@dataclass(frozen=True, slots=True)
class AliasEntry:
    irc_nick: str
    developer: str
    relay_token: str


@dataclass
class BotConfig:
    irc_host: str
    irc_port: int
    nick: str
    channels: list[str]
    api_url: str
    network: str
    aliases: dict[str, AliasEntry] = field(default_factory=dict)  # lowercased irc nick
    data_dir: Path = Path("./aa-bot")


def load_alias_map(path: Path) -> tuple[str, dict[str, AliasEntry]]:
    """Alias file: {"network": ..., "entries": [{irc_nick, developer, relay_token}]}.
    A nick may map to at most one developer per network."""
    data = json.loads(Path(path).read_text())
    entries: dict[str, AliasEntry] = {}
    for row in data.get("entries", []):
        key = row["irc_nick"].lower()
        if key in entries:
            raise ValueError(f"alias {row['irc_nick']!r} mapped twice")
        entries[key] = AliasEntry(
            irc_nick=row["irc_nick"],
            developer=row["developer"],
            relay_token=row["relay_token"],
        )
    return data.get("network", "irc"), entries


_CHANNEL_CMD = re.compile(r"^(?P<bot>[^\s:,]+)[:,]\s*(?P<rest>.*)$")
_SHOUT_CMD = re.compile(r"^shout(?:\s+(?P<text>.*))?$", re.IGNORECASE | re.DOTALL)


def parse_command(bot_nick: str, target: str, text: str) -> str | None:
    """Extract the shout payload, or None when the line is not addressed to
    us. In channels the command must be prefixed with the bot's nick; in
    private messages it stands alone. Empty payloads return ""."""
    body = text.strip()
    if target.lower() != bot_nick.lower():
        hit = _CHANNEL_CMD.match(body)
        if not hit or hit.group("bot").lower() != bot_nick.lower():
            return None
        body = hit.group("rest").strip()
    cmd = _SHOUT_CMD.match(body)
    if not cmd:
        return None
    return (cmd.group("text") or "").strip()


class BotRelay:
    """Mapping + queueing policy, kept separate from the socket loop."""

    def __init__(self, config: BotConfig, transport: Transport = http_transport):
        self.config = config
        self.transport = transport
        self._queues: dict[str, ClientQueue] = {}

    def _client_for(self, entry: AliasEntry) -> tuple[ClientConfig, ClientQueue]:
        queue = self._queues.get(entry.developer)
        if queue is None:
            queue = ClientQueue(self.config.data_dir / f"queue-{entry.developer}.jsonl")
            self._queues[entry.developer] = queue
        cfg = ClientConfig(
            server_url=self.config.api_url,
            token=entry.relay_token,
            client_id=f"bot-{self.config.network}-{entry.developer}",
        )
        return cfg, queue

    def handle(self, from_nick: str, target: str, text: str) -> str | None:
        """Returns the reply line for the sender, or None to stay silent."""
        payload = parse_command(self.config.nick, target, text)
        if payload is None:
            return None
        entry = self.config.aliases.get(from_nick.lower())
        if entry is None:
            return "sorry, I don't have you mapped to a developer; nothing was logged"
        try:
            normalized = normalize_shout_text(payload)
        except EmptyShout:
            return "nothing to log: shout text is empty"
        except TooLong as exc:
            return f"not logged: {exc}"
        cfg, queue = self._client_for(entry)
        queued = queue.enqueue(normalized, now_utc())
        result = push(cfg, queue, self.transport)
        refreshed = {e.seq: e for e in queue.entries()}[queued.seq]
        if refreshed.state == "pushed":
            return f"logged for {entry.developer} (#{refreshed.shout_id})"
        if refreshed.state == "rejected":
            reason = result.errors[-1] if result.errors else "rejected"
            return f"server refused the shout ({reason})"
        return f"queued for {entry.developer}; server unreachable, will retry"

    def flush(self) -> None:
        """Drain every mapped developer's queue, including entries left over
        from a previous run."""
        for entry in self.config.aliases.values():
            cfg, queue = self._client_for(entry)
            push(cfg, queue, self.transport)


def parse_irc_line(line: str) -> tuple[str | None, str, list[str]]:
    """Split ':prefix COMMAND arg1 arg2 :trailing' into (prefix, command, params)."""
    prefix = None
    if line.startswith(":"):
        prefix, _, line = line[1:].partition(" ")
    trailing = None
    if " :" in line:
        line, _, trailing = line.partition(" :")
    params = line.split()
    command, params = params[0], params[1:]
    if trailing is not None:
        params.append(trailing)
    return prefix, command.upper(), params


class IrcBot:
    def __init__(self, config: BotConfig, relay: BotRelay | None = None,
                 transport: Transport = http_transport):
        self.config = config
        self.relay = relay or BotRelay(config, transport)
        self._sock: socket.socket | None = None
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()
        sock = self._sock
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass

    def _send(self, line: str) -> None:
        logger.debug(">> %s", line)
        self._sock.sendall((line + "\r\n").encode("utf-8"))

    def _connect_once(self) -> None:
        self._sock = socket.create_connection(
            (self.config.irc_host, self.config.irc_port), timeout=310)
        self._send(f"NICK {self.config.nick}")
        self._send(f"USER {self.config.nick} 0 * :aa relay bot")
        buffer = b""
        registered = False
        while not self._stop.is_set():
            chunk = self._sock.recv(4096)
            if not chunk:
                raise ConnectionResetError("server closed the connection")
            buffer += chunk
            while b"\r\n" in buffer:
                raw, _, buffer = buffer.partition(b"\r\n")
                line = raw.decode("utf-8", errors="replace")
                logger.debug("<< %s", line)
                prefix, command, params = parse_irc_line(line)
                if command == "PING":
                    self._send(f"PONG :{params[-1] if params else ''}")
                elif command == "001" and not registered:
                    registered = True
                    for channel in self.config.channels:
                        self._send(f"JOIN {channel}")
                    self.relay.flush()  # drain anything queued while offline
                elif command == "PRIVMSG" and prefix:
                    from_nick = prefix.split("!", 1)[0]
                    target, text = params[0], params[-1]
                    reply = self.relay.handle(from_nick, target, text)
                    if reply:
                        self._send(f"NOTICE {from_nick} :{reply}")

    def run_forever(self) -> None:
        backoff = RECONNECT_START_S
        while not self._stop.is_set():
            try:
                started = time.monotonic()
                self._connect_once()
            except OSError as exc:
                if self._stop.is_set():
                    break
                # a connection that lived a while earns a fresh backoff
                if time.monotonic() - started > 60:
                    backoff = RECONNECT_START_S
                logger.warning("IRC connection lost (%s); reconnecting in %.0fs", exc, backoff)
                if self._stop.wait(backoff):
                    break
                backoff = min(backoff * 2, RECONNECT_CAP_S)
            finally:
                if self._sock is not None:
                    try:
                        self._sock.close()
                    except OSError:
                        pass
        self.relay.flush()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="aa-bot", description="IRC shout relay")
    parser.add_argument("--irc-host", required=True)
    parser.add_argument("--irc-port", type=int, default=6667)
    parser.add_argument("--nick", default="aabot")
    parser.add_argument("--channel", action="append", default=[], help="channel to join (repeatable)")
    parser.add_argument("--api-url", required=True, help="aa server base URL")
    parser.add_argument("--aliases", required=True, help="alias map JSON file")
    parser.add_argument("--data-dir", default="./aa-bot")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    network, aliases = load_alias_map(Path(args.aliases))
    config = BotConfig(
        irc_host=args.irc_host,
        irc_port=args.irc_port,
        nick=args.nick,
        channels=args.channel,
        api_url=args.api_url,
        network=network,
        aliases=aliases,
        data_dir=Path(args.data_dir),
    )
    bot = IrcBot(config)
    try:
        bot.run_forever()
    except KeyboardInterrupt:
        bot.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
