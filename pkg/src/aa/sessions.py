"""Session views over the store: canonical grouping with caching, windowed
regrouping for queries, and id-based lookup.

A session id names (author, anchor shout); looking one up expands forward
from the anchor, so ids minted by windowed listings resolve too.
"""

from __future__ import annotations

import threading

from datetime import datetime

from .model import (
    SESSION_START_MARKER,
    SESSION_STOP_MARKER,
    Session,
    Shout,
    TimeslotConfig,
    group_sessions,
    session_id_for,
)
from .store import Store


class SessionService:
    def __init__(self, store: Store, cfg: TimeslotConfig):
        self.store = store
        self.cfg = cfg
        self._lock = threading.Lock()
        self._cache_mutation = -1
        self._canonical: dict[str, list[Session]] = {}
        self._shout_session: dict[int, str] = {}
        self._anchors: dict[str, int] = {}  # session_id -> anchor shout id

    def _refresh(self) -> None:
        with self._lock:
            if self._cache_mutation == self.store.mutation:
                return
            canonical: dict[str, list[Session]] = {}
            shout_session: dict[int, str] = {}
            anchors: dict[str, int] = {}
            for author in self.store.authors():
                sessions = group_sessions(self.store.shouts_for(author), self.cfg)
                canonical[author] = sessions
                for sess in sessions:
                    for shout in sess.shouts:
                        shout_session[shout.id] = sess.session_id
            for shout in self.store.all_shouts():
                anchors[session_id_for(shout.author, shout.id)] = shout.id
            self._canonical = canonical
            self._shout_session = shout_session
            self._anchors = anchors
            self._cache_mutation = self.store.mutation

    def _decorate(self, session: Session) -> Session:
        session.screencast_url = self.store.screencast_for(session.session_id)
        session.validation_state = self.store.validation_state_for(session.session_id)
        return session

    def canonical_sessions(self, author: str | None = None) -> list[Session]:
        """Grouping over the full corpus, most recent state, decorated."""
        self._refresh()
        with self._lock:
            if author is not None:
                sessions = list(self._canonical.get(author, ()))
            else:
                sessions = [s for runs in self._canonical.values() for s in runs]
        sessions.sort(key=lambda s: (s.started_at, s.author))
        return [self._decorate(s) for s in sessions]

    def sessions_in_window(
        self,
        author: str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
    ) -> list[Session]:
        """Regroup only the shouts inside the window; activity outside it is
        cut off, so a boundary-spanning run appears truncated by design."""
        authors = [author] if author else self.store.authors()
        out: list[Session] = []
        for nick in authors:
            rows = self.store.query_shouts(
                author=nick, since=since, until=until, order="oldest_first"
            )
            out.extend(group_sessions(rows, self.cfg))
        out.sort(key=lambda s: (s.started_at, s.author))
        return [self._decorate(s) for s in out]

    def session_by_id(self, session_id: str) -> Session | None:
        """Resolve an id to the session anchored at its first shout, expanded
        forward over the full corpus."""
        self._refresh()
        with self._lock:
            anchor_id = self._anchors.get(session_id)
        if anchor_id is None:
            return None
        anchor = self.store.shout_by_id(anchor_id)
        rows = sorted(
            self.store.shouts_for(anchor.author),
            key=lambda s: (s.client_ts, s.server_ts, s.id),
        )
        idx = next(i for i, s in enumerate(rows) if s.id == anchor_id)
        run = [rows[idx]]
        for prev, cur in zip(rows[idx:], rows[idx + 1:]):
            if (cur.client_ts - prev.client_ts) > self.cfg.session_gap:
                break
            if cur.text == SESSION_START_MARKER or prev.text == SESSION_STOP_MARKER:
                break
            run.append(cur)
        return self._decorate(Session(session_id=session_id, author=anchor.author, shouts=run))

    def session_id_of_shout(self, shout: Shout) -> str:
        """Id of the canonical session containing this shout (feed column)."""
        self._refresh()
        with self._lock:
            return self._shout_session[shout.id]
