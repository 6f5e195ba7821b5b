"""IRC bot tests: command parsing, relay policy, and a scripted IRC server
exercising the socket loop end to end."""

from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import requests

import aa.bot as botmod
from aa.bot import AliasEntry, BotConfig, BotRelay, IrcBot, load_alias_map, parse_command, parse_irc_line

from conftest import relay_token_for


# -- parsing --------------------------------------------------------------


def test_parse_command_private_message():
    assert parse_command("aabot", "aabot", "shout escrevendo testes") == "escrevendo testes"
    assert parse_command("aabot", "aabot", "SHOUT caixa alta") == "caixa alta"
    assert parse_command("aabot", "aabot", "shout ") == ""
    assert parse_command("aabot", "aabot", "shout") == ""
    assert parse_command("aabot", "aabot", "hello there") is None


def test_parse_command_channel_requires_address():
    assert parse_command("aabot", "#lab", "aabot: shout no canal") == "no canal"
    assert parse_command("aabot", "#lab", "aabot, shout com virgula") == "com virgula"
    assert parse_command("aabot", "#lab", "shout sem endereco") is None
    assert parse_command("aabot", "#lab", "outrobot: shout pra outro") is None
    assert parse_command("aabot", "#lab", "bate papo normal") is None


def test_parse_irc_line():
    assert parse_irc_line(":v1z!u@h PRIVMSG #lab :ola mundo") == \
        ("v1z!u@h", "PRIVMSG", ["#lab", "ola mundo"])
    assert parse_irc_line("PING :irc.example") == (None, "PING", ["irc.example"])
    assert parse_irc_line(":srv 001 aabot :welcome") == ("srv", "001", ["aabot", "welcome"])


def test_alias_map_rejects_duplicates(tmp_path):
    path = tmp_path / "aliases.json"
    path.write_text(json.dumps({"network": "libera", "entries": [
        {"irc_nick": "v1z_irc", "developer": "v1z", "relay_token": "t1"},
        {"irc_nick": "V1Z_IRC", "developer": "hybrid", "relay_token": "t2"},
    ]}))
    with pytest.raises(ValueError):
        load_alias_map(path)


# -- relay policy ------------------------------------------------------------


def bot_config(tmp_path, api_url, nicks=("v1z",)) -> BotConfig:
    return BotConfig(
        irc_host="unused", irc_port=0, nick="aabot", channels=["#lab"],
        api_url=api_url, network="libera",
        aliases={f"{nick}_irc": AliasEntry(f"{nick}_irc", nick, relay_token_for(nick))
                 for nick in nicks},
        data_dir=tmp_path / "bot",
    )


def test_relay_mapped_nick_reaches_feed(server_handle, tmp_path):
    relay = BotRelay(bot_config(tmp_path, server_handle.base_url))
    reply = relay.handle("v1z_irc", "aabot", "shout respondidos os interessados na pesquisa")
    assert reply.startswith("logged for v1z")
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    assert feed["entries"][0]["text"] == "respondidos os interessados na pesquisa"
    assert feed["entries"][0]["author"] == "v1z"


def test_relay_refuses_unmapped_nick(server_handle, tmp_path):
    relay = BotRelay(bot_config(tmp_path, server_handle.base_url))
    reply = relay.handle("intruso", "aabot", "shout tentando aparecer")
    assert "don't have you mapped" in reply
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    assert feed["entries"] == []


def test_relay_ignores_unaddressed_channel_chatter(server_handle, tmp_path):
    relay = BotRelay(bot_config(tmp_path, server_handle.base_url))
    assert relay.handle("v1z_irc", "#lab", "conversa qualquer") is None
    assert relay.handle("v1z_irc", "#lab", "shout sem prefixo") is None


def test_relay_empty_shout_is_an_error_reply(server_handle, tmp_path):
    relay = BotRelay(bot_config(tmp_path, server_handle.base_url))
    reply = relay.handle("v1z_irc", "aabot", "shout ")
    assert "empty" in reply
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    assert feed["entries"] == []


def test_relay_never_logs_for_fuzzed_unmapped_nicks(server_handle, tmp_path):
    import random
    rng = random.Random(8)
    relay = BotRelay(bot_config(tmp_path, server_handle.base_url))
    for _ in range(30):
        nick = "".join(rng.choice("abcdefghij_") for _ in range(rng.randint(2, 10)))
        if nick in relay.config.aliases:
            continue
        reply = relay.handle(nick, "aabot", "shout tentativa de entrada")
        assert reply is not None and "mapped" in reply
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    assert feed["entries"] == []


def test_relay_queues_when_server_down_then_flushes(server_handle, tmp_path):
    down = BotRelay(bot_config(tmp_path, "http://127.0.0.1:1"))
    reply = down.handle("v1z_irc", "aabot", "shout guardado pra depois")
    assert "queued" in reply

    up = BotRelay(bot_config(tmp_path, server_handle.base_url))
    up.handle("v1z_irc", "aabot", "shout nova mensagem")  # same queue file drains first
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    texts = [e["text"] for e in feed["entries"]]
    assert texts == ["nova mensagem", "guardado pra depois"]


# -- scripted IRC server ----------------------------------------------------------


class IrcStub:
    """Single-client scripted IRC server; welcomes registrations and records
    everything the bot sends."""

    def __init__(self):
        self._listener = socket.socket()
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(2)
        self._listener.settimeout(0.1)
        self.port = self._listener.getsockname()[1]
        self.lines: list[str] = []
        self.connections = 0
        self._conn: socket.socket | None = None
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            with self._lock:
                self._conn = conn
                self.connections += 1
            self._serve(conn)

    def _serve(self, conn):
        conn.settimeout(0.1)
        buffer = b""
        nick = user = welcomed = False
        while not self._stop.is_set():
            try:
                chunk = conn.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                return
            if not chunk:
                return
            buffer += chunk
            while b"\r\n" in buffer:
                raw, _, buffer = buffer.partition(b"\r\n")
                line = raw.decode("utf-8", errors="replace")
                with self._lock:
                    self.lines.append(line)
                if line.startswith("NICK "):
                    nick = True
                elif line.startswith("USER "):
                    user = True
                if nick and user and not welcomed:
                    welcomed = True
                    self.send(":stub 001 aabot :welcome")

    def send(self, line: str):
        with self._lock:
            conn = self._conn
        conn.sendall((line + "\r\n").encode())

    def privmsg(self, from_nick: str, target: str, text: str):
        self.send(f":{from_nick}!user@host PRIVMSG {target} :{text}")

    def kill_connection(self):
        with self._lock:
            conn = self._conn
        if conn:
            try:
                conn.shutdown(socket.SHUT_RDWR)
                conn.close()
            except OSError:
                pass

    def wait_for(self, predicate, timeout=10.0) -> str | None:
        deadline = time.time() + timeout
        seen = 0
        while time.time() < deadline:
            with self._lock:
                rows = self.lines[seen:]
                seen = len(self.lines)
            for line in rows:
                if predicate(line):
                    return line
            time.sleep(0.02)
        return None

    def stop(self):
        self._stop.set()
        self.kill_connection()
        self._listener.close()
        self._thread.join(timeout=5)


@pytest.fixture
def irc_stub():
    stub = IrcStub()
    yield stub
    stub.stop()


def run_bot(config) -> tuple[IrcBot, threading.Thread]:
    bot = IrcBot(config)
    thread = threading.Thread(target=bot.run_forever, daemon=True)
    thread.start()
    return bot, thread


def test_bot_end_to_end_relay(server_handle, irc_stub, tmp_path):
    config = bot_config(tmp_path, server_handle.base_url)
    config.irc_host, config.irc_port = "127.0.0.1", irc_stub.port
    bot, thread = run_bot(config)
    try:
        assert irc_stub.wait_for(lambda l: l.startswith("JOIN #lab")) is not None

        irc_stub.privmsg("v1z_irc", "aabot", "shout trabalhando no relay")
        ack = irc_stub.wait_for(lambda l: l.startswith("NOTICE v1z_irc"))
        assert ack is not None and "logged for v1z" in ack

        irc_stub.privmsg("intruso", "aabot", "shout eu tambem quero")
        refusal = irc_stub.wait_for(lambda l: l.startswith("NOTICE intruso"))
        assert refusal is not None and "mapped" in refusal

        irc_stub.privmsg("v1z_irc", "#lab", "bate papo que o bot ignora")
        irc_stub.privmsg("v1z_irc", "#lab", "aabot: shout mensagem no canal")
        deadline = time.time() + 10
        texts = []
        while time.time() < deadline:
            feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
            texts = [e["text"] for e in feed["entries"]]
            if len(texts) >= 2:
                break
            time.sleep(0.05)
        assert texts == ["mensagem no canal", "trabalhando no relay"]
        assert all(e["author"] == "v1z" for e in feed["entries"])
    finally:
        bot.stop()
        thread.join(timeout=5)


def test_clean_shutdown_flushes_queued_relays(server_handle, irc_stub, tmp_path, monkeypatch):
    # queue a shout while the aa server is "down", then stop the bot with the
    # server reachable: the shutdown flush must drain it
    config = bot_config(tmp_path, "http://127.0.0.1:1")  # aa server "down"
    config.irc_host, config.irc_port = "127.0.0.1", irc_stub.port
    bot, thread = run_bot(config)
    try:
        assert irc_stub.wait_for(lambda l: l.startswith("JOIN #lab")) is not None
        irc_stub.privmsg("v1z_irc", "aabot", "shout preso na fila")
        assert irc_stub.wait_for(lambda l: "queued for v1z" in l) is not None
        config.api_url = server_handle.base_url  # server comes back before shutdown
    finally:
        bot.stop()
        thread.join(timeout=5)
    feed = requests.get(f"{server_handle.base_url}/api/feed", timeout=10).json()
    assert [e["text"] for e in feed["entries"]] == ["preso na fila"]


def test_bot_reconnects_after_connection_loss(server_handle, irc_stub, tmp_path, monkeypatch):
    monkeypatch.setattr(botmod, "RECONNECT_START_S", 0.05)
    config = bot_config(tmp_path, server_handle.base_url)
    config.irc_host, config.irc_port = "127.0.0.1", irc_stub.port
    bot, thread = run_bot(config)
    try:
        assert irc_stub.wait_for(lambda l: l.startswith("JOIN #lab")) is not None
        irc_stub.kill_connection()

        deadline = time.time() + 10
        while time.time() < deadline and irc_stub.connections < 2:
            time.sleep(0.05)
        assert irc_stub.connections >= 2
        assert irc_stub.wait_for(
            lambda l: l.startswith("JOIN #lab")) is not None

        # still relays after the reconnect
        irc_stub.privmsg("v1z_irc", "aabot", "shout sobrevivi a queda")
        assert irc_stub.wait_for(lambda l: "logged for v1z" in l) is not None
    finally:
        bot.stop()
        thread.join(timeout=5)
