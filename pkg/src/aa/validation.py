"""Peer validation: close finished sessions, randomly assign a validator,
notify them with a tokenized review URL, and record write-once verdicts.
"""

from __future__ import annotations

import json
import logging
import random
import secrets
import smtplib
import time
import urllib.request
from dataclasses import dataclass
from datetime import datetime
from email.message import EmailMessage
from typing import Callable, Protocol

from .errors import DeliveryFailed, DuplicateAssignment
from .model import SESSION_STOP_MARKER, Session, TimeslotConfig, ValidationAssignment
from .sessions import SessionService
from .store import Store
from .timeutil import now_utc

logger = logging.getLogger(__name__)

MAX_DELIVERY_ATTEMPTS = 5
BACKOFF_START_S = 0.5


@dataclass(frozen=True, slots=True)
class ValidationNotice:
    to_address: str
    session_id: str
    validator: str
    session_author: str
    url: str


class Notifier(Protocol):
    def deliver(self, notice: ValidationNotice) -> None:
        """Deliver one notification or raise DeliveryFailed."""


class ConsoleNotifier:
    """Fallback transport: log the validation URL. Keeps a self-hosted setup
    functional without a mail relay."""

    def deliver(self, notice: ValidationNotice) -> None:
        logger.info(
            "validation request for %s: session %s by %s -> %s",
            notice.validator, notice.session_id, notice.session_author, notice.url,
        )


class WebhookNotifier:
    """POSTs {session_id, url} to the developer's webhook address."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout

    def deliver(self, notice: ValidationNotice) -> None:
        body = json.dumps({"session_id": notice.session_id, "url": notice.url}).encode()
        req = urllib.request.Request(
            notice.to_address, data=body,
            headers={"Content-Type": "application/json"}, method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                if resp.status >= 400:
                    raise DeliveryFailed(f"webhook returned {resp.status}")
        except DeliveryFailed:
            raise
        except Exception as exc:
            raise DeliveryFailed(f"webhook delivery failed: {exc}") from exc


class EmailNotifier:
    """Plain-text mail through a configured SMTP relay."""

    def __init__(self, host: str, port: int = 25, sender: str = "aa@localhost"):
        self.host = host
        self.port = port
        self.sender = sender

    def deliver(self, notice: ValidationNotice) -> None:
        msg = EmailMessage()
        msg["From"] = self.sender
        msg["To"] = notice.to_address
        msg["Subject"] = f"please validate a session by {notice.session_author}"
        msg.set_content(
            f"You were chosen to validate session {notice.session_id} "
            f"by {notice.session_author}.\n\nReview it here: {notice.url}\n"
        )
        try:
            with smtplib.SMTP(self.host, self.port, timeout=10) as smtp:
                smtp.send_message(msg)
        except Exception as exc:
            raise DeliveryFailed(f"smtp delivery failed: {exc}") from exc


class DispatchingNotifier:
    """Routes by address shape: http(s) URL -> webhook, mailto:/user@host ->
    email when SMTP is configured, anything else (or no address) -> console."""

    def __init__(self, email: EmailNotifier | None = None, webhook: WebhookNotifier | None = None):
        self.email = email
        self.webhook = webhook or WebhookNotifier()
        self.console = ConsoleNotifier()

    def deliver(self, notice: ValidationNotice) -> None:
        address = notice.to_address or ""
        if address.startswith(("http://", "https://")):
            self.webhook.deliver(notice)
            return
        if self.email is not None and ("@" in address or address.startswith("mailto:")):
            self.email.deliver(notice)
            return
        self.console.deliver(notice)


def deliver_with_retry(
    notifier: Notifier,
    notice: ValidationNotice,
    *,
    attempts: int = MAX_DELIVERY_ATTEMPTS,
    sleep: Callable[[float], None] = time.sleep,
) -> bool:
    """At-least-once delivery with doubling backoff; exhaustion is logged, not
    raised, so a dead transport never blocks assignment or verdicts."""
    delay = BACKOFF_START_S
    for attempt in range(1, attempts + 1):
        try:
            notifier.deliver(notice)
            return True
        except DeliveryFailed as exc:
            if attempt == attempts:
                logger.error("giving up on notification after %d attempts: %s", attempts, exc)
                return False
            logger.warning("notification attempt %d failed (%s), retrying in %.1fs",
                           attempt, exc, delay)
            sleep(delay)
            delay *= 2
    return False


def new_token() -> str:
    # 16 random bytes = 128 bits, URL-safe
    return secrets.token_urlsafe(16)


class ValidationEngine:
    def __init__(
        self,
        store: Store,
        sessions: SessionService,
        cfg: TimeslotConfig,
        *,
        base_url: str = "http://localhost:8337",
        notifier: Notifier | None = None,
        rng: random.Random | None = None,
        now_fn: Callable[[], datetime] = now_utc,
        notify_sleep: Callable[[float], None] = time.sleep,
    ):
        self.store = store
        self.sessions = sessions
        self.cfg = cfg
        self.base_url = base_url.rstrip("/")
        self.notifier = notifier or ConsoleNotifier()
        self.rng = rng or random.Random()
        self._now = now_fn
        self._notify_sleep = notify_sleep

    def validation_url(self, token: str) -> str:
        return f"{self.base_url}/validate/{token}"

    def _closed(self, session: Session, now: datetime) -> bool:
        if session.shouts[-1].text == SESSION_STOP_MARKER:
            return True
        return (now - session.ended_at) > self.cfg.session_gap

    def close_and_assign(self, now: datetime | None = None) -> list[ValidationAssignment]:
        """One scan: every definitively-closed, still-pending canonical session
        gets exactly one validator, drawn uniformly from the active developers
        excluding the author. Re-running is idempotent per session."""
        now = now or self._now()
        created: list[ValidationAssignment] = []
        active = [d.nick for d in self.store.developers() if d.active]
        for session in self.sessions.canonical_sessions():
            if session.validation_state != "pending":
                continue
            if not self._closed(session, now):
                continue
            eligible = [nick for nick in active if nick != session.author]
            if not eligible:
                logger.warning(
                    "no eligible validator for session %s by %s; leaving it pending",
                    session.session_id, session.author,
                )
                continue
            validator = self.rng.choice(eligible)
            try:
                assignment = self.store.assign_validation(
                    session_id=session.session_id,
                    author=session.author,
                    validator=validator,
                    token=new_token(),
                    assigned_at=now,
                )
            except DuplicateAssignment:
                continue
            created.append(assignment)
            self.notify(assignment)
        return created

    def notify(self, assignment: ValidationAssignment) -> bool:
        dev = self.store.developer(assignment.validator)
        notice = ValidationNotice(
            to_address=(dev.notify_address if dev else None) or "",
            session_id=assignment.session_id,
            validator=assignment.validator,
            session_author=assignment.session_author,
            url=self.validation_url(assignment.token),
        )
        return deliver_with_retry(self.notifier, notice, sleep=self._notify_sleep)

    def record_verdict(
        self, token: str, verdict: str, comment: str | None = None
    ) -> ValidationAssignment:
        return self.store.record_verdict(token, verdict, comment, self._now())

    def pending_for(self, validator: str) -> list[ValidationAssignment]:
        return self.store.assignments_for_validator(validator, undecided_only=True)
