"""Shared fixtures: the 16-row demo corpus and a live threaded server."""

from __future__ import annotations

import random

import pytest

from aa.model import Developer, Shout
from aa.server import ServerConfig, build_app, start_in_thread
from aa.timeutil import parse_ts

# The demo corpus: four developers' shouts over 26-28 May 2013, shared by the
# unit tests and the acceptance suite.
FIXTURE_ROWS = [
    ("hybrid", "2013-05-28T12:06:00Z",
     "respondidos os interessados na pesquisa de redes e amigos, feita reuniao com -chu, "
     "encaminhada da infra para xerox e impressao e acompanhada defesa de desambiguacao "
     "do fernando nobre"),
    ("filter0", "2013-05-28T03:25:00Z",
     "aprendendo relatividade geral enquanto o python faz contas"),
    ("v1z", "2013-05-28T01:37:00Z",
     "tentando encontrar um balanço entre detalhe e velocidade no curso de Pattern Theory "
     "- nao quero ficar no cap 1 o curso todo"),
    ("hybrid", "2013-05-27T18:28:00Z",
     "achada a quinta e terceira edicao do livro do luger: "
     "http://ubuntuone.com/5gMOkYtchUDaR7Yqw2KTX"),
    ("aut0mata", "2013-05-27T16:21:00Z",
     "gabithume OPW Mozilla "
     "https://live.gnome.org/OutreachProgramForWomen/2013/JuneSeptember#Accepted_Participants"),
    ("hybrid", "2013-05-27T16:16:00Z",
     "gabithume inaugura participacao macambira no GPW Mozilla"),
    ("hybrid", "2013-05-27T12:29:00Z",
     "referencias interessantes por filter0 http://ubuntuone.com/7/Nb92IA2tXISAmjP23G3 "
     "de emergencia de padroes estruturais por sincronizacao e "
     "http://www3.nd.edu/~netsci/TALKS/Sayama_CT.pdf automatos geradores de redes GNA "
     "(generative net aut)"),
    ("v1z", "2013-05-27T02:49:00Z", "video da ultima versao em https://vimeo.com/pet-0-3-1"),
    ("v1z", "2013-05-27T02:48:00Z", "pet 0.3.1 solto"),
    ("v1z", "2013-05-27T02:18:00Z",
     "git commit in /Users/rfabbri/pet/pet: sprite do coma alcoolico"),
    ("v1z", "2013-05-27T02:08:00Z", "git commit in /Users/rfabbri/pet/pet: displaying hour"),
    ("v1z", "2013-05-27T01:42:00Z",
     "git commit in /Users/rfabbri/pet/pet: dois estagios de animacao de bebado, "
     "implementado com classes separadas"),
    ("v1z", "2013-05-27T01:06:00Z",
     "git commit in /Users/rfabbri/pet/pet: pingo vomitando sem borramento agora blz"),
    ("v1z", "2013-05-27T00:14:00Z", "investigando pq sprite ta borrada"),
    ("v1z", "2013-05-26T23:56:00Z",
     "git commit -am da bala de licor - vomitando q nem doido - volta ao normal"),
    ("v1z", "2013-05-26T23:41:00Z",
     "git commit -am eliminated stupid lists and using references directly now for the"),
]

FIXTURE_NICKS = ("hybrid", "filter0", "v1z", "aut0mata")


def fixture_rows_oldest_first():
    return sorted(FIXTURE_ROWS, key=lambda row: row[1])


def token_for(nick: str) -> str:
    return f"{nick}-token-0123456789abcdef"


def relay_token_for(nick: str) -> str:
    return f"{nick}-relay-0123456789abcdef"


def make_developer(nick: str, **overrides) -> Developer:
    fields = dict(
        nick=nick,
        auth_token=token_for(nick),
        relay_token=relay_token_for(nick),
        chat_aliases=frozenset({("libera", f"{nick}_irc")}),
        notify_address=None,
        active=True,
    )
    fields.update(overrides)
    return Developer(**fields)


def mk_shout(id: int, author: str, client_ts: str, text: str = "x",
             server_ts: str | None = None, origin: str = "cli",
             client_id: str | None = None, client_seq: int | None = None) -> Shout:
    return Shout(
        id=id,
        author=author,
        text=text,
        client_ts=parse_ts(client_ts),
        server_ts=parse_ts(server_ts or client_ts),
        origin=origin,
        client_id=client_id or f"c-{author}",
        client_seq=client_seq if client_seq is not None else id,
    )


class RecordingNotifier:
    def __init__(self):
        self.notices = []

    def deliver(self, notice):
        self.notices.append(notice)


def seed_developers(store, nicks=FIXTURE_NICKS):
    for nick in nicks:
        store.upsert_developer(make_developer(nick))


def ingest_fixture(store):
    """Load the demo corpus straight into a store, oldest first."""
    seq = {}
    for author, ts, text in fixture_rows_oldest_first():
        seq[author] = seq.get(author, -1) + 1
        store.append_shout(
            author=author, text=text, client_ts=parse_ts(ts),
            origin="http", client_id=f"fixture-{author}", client_seq=seq[author],
        )


def post_fixture(base_url: str):
    """Load the demo corpus through the HTTP API, oldest first."""
    import requests

    seq = {}
    for author, ts, text in fixture_rows_oldest_first():
        seq[author] = seq.get(author, -1) + 1
        resp = requests.post(f"{base_url}/api/shouts", json={
            "auth_token": token_for(author),
            "text": text,
            "client_ts": ts,
            "client_id": f"fixture-{author}",
            "seq": seq[author],
        }, timeout=10)
        assert resp.status_code == 200, resp.text
        assert resp.json()["accepted"] is True


@pytest.fixture
def server_handle(tmp_path):
    """Live threaded server on an ephemeral port with the four demo
    developers provisioned; validation scans disabled (tests drive them)."""
    config = ServerConfig(
        data_dir=tmp_path / "data",
        scan_interval_s=0,
        fsync=False,
    )
    notifier = RecordingNotifier()
    app = build_app(config, engine_kwargs={
        "rng": random.Random(20130527),
        "notifier": notifier,
        "notify_sleep": lambda s: None,
    })
    seed_developers(app.store)
    handle = start_in_thread(app)
    handle.notifier = notifier
    yield handle
    handle.stop()
