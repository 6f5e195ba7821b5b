"""Behavioral statistics over the stored corpus: per-developer session and
shout counts, gap histograms, and the daily-session compliance report.

Everything here is a pure function of the journal contents and the window,
so recomputation after a restart is identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

from .errors import UnknownDeveloper
from .model import Session, TimeslotConfig, group_sessions
from .sessions import SessionService
from .store import Store

# Bucket edges in minutes, chosen around the proposed 5/10/15 cadence band.
# Lower edge inclusive, upper exclusive; the last bucket absorbs anything
# >= 30 minutes (bounded above by session_gap, 60 by default).
GAP_BUCKETS = ("0-5", "5-10", "10-15", "15-30", "30-60")
_EDGES_MIN = (5, 10, 15, 30)

DEFAULT_COMPLIANCE_HOURS = 2.0


def _bucket_for(gap_s: float) -> str:
    minutes = gap_s / 60.0
    for edge, label in zip(_EDGES_MIN, GAP_BUCKETS):
        if minutes < edge:
            return label
    return GAP_BUCKETS[-1]


@dataclass(slots=True)
class DeveloperStats:
    nick: str
    window_from: datetime
    window_to: datetime
    sessions_count: int = 0
    total_session_seconds: int = 0
    shouts_count: int = 0
    mean_session_duration_s: float = 0.0
    mean_shouts_per_session: float = 0.0
    intershout_gap_histogram: dict[str, int] = field(
        default_factory=lambda: {label: 0 for label in GAP_BUCKETS}
    )
    days_with_sessions: int = 0
    validation: dict[str, int] = field(
        default_factory=lambda: {"validated": 0, "valid": 0, "invalid": 0, "pending": 0}
    )


@dataclass(slots=True)
class ComplianceDay:
    day: str
    single_session_ok: bool
    cumulative_ok: bool


@dataclass(slots=True)
class DeveloperReport:
    stats: DeveloperStats
    non_compliant_days_single: list[str]
    non_compliant_days_cumulative: list[str]


def _window_sessions(
    store: Store, cfg: TimeslotConfig, author: str, window_from: datetime, window_to: datetime
) -> list[Session]:
    rows = store.query_shouts(
        author=author, since=window_from, until=window_to, order="oldest_first"
    )
    return group_sessions(rows, cfg)


def compute_stats(
    store: Store,
    sessions: SessionService,
    author: str,
    window_from: datetime,
    window_to: datetime,
) -> DeveloperStats:
    """Stats over the author's sessions regrouped within the window. Sessions
    are attributed to the UTC date they start on."""
    if window_from > window_to:
        raise ValueError("window_from must be <= window_to")
    if store.developer(author) is None:
        raise UnknownDeveloper(author)

    runs = _window_sessions(store, sessions.cfg, author, window_from, window_to)
    stats = DeveloperStats(nick=author, window_from=window_from, window_to=window_to)
    days: set[date] = set()
    for sess in runs:
        # verdicts attach to canonical sessions; report the state of the
        # canonical session this windowed run belongs to
        canonical_id = sessions.session_id_of_shout(sess.shouts[0])
        state = store.validation_state_for(canonical_id)
        stats.sessions_count += 1
        stats.total_session_seconds += sess.duration_s
        stats.shouts_count += len(sess.shouts)
        days.add(sess.started_at.date())
        for prev, cur in zip(sess.shouts, sess.shouts[1:]):
            gap_s = (cur.client_ts - prev.client_ts).total_seconds()
            stats.intershout_gap_histogram[_bucket_for(gap_s)] += 1
        if state == "valid":
            stats.validation["valid"] += 1
        elif state == "invalid":
            stats.validation["invalid"] += 1
        else:
            stats.validation["pending"] += 1
    stats.validation["validated"] = stats.validation["valid"] + stats.validation["invalid"]
    stats.days_with_sessions = len(days)
    if stats.sessions_count:
        stats.mean_session_duration_s = stats.total_session_seconds / stats.sessions_count
        stats.mean_shouts_per_session = stats.shouts_count / stats.sessions_count
    return stats


@dataclass(slots=True)
class TeamReport:
    window_from: datetime
    window_to: datetime
    compliance_hours: float
    per_developer: dict[str, DeveloperReport]
    team: dict[str, float]


def team_report(
    store: Store,
    sessions: SessionService,
    window_from: datetime,
    window_to: datetime,
    *,
    compliance_hours: float = DEFAULT_COMPLIANCE_HOURS,
) -> TeamReport:
    """Per-developer stats plus two readings of the one-long-session-per-day
    rule: 'single' needs one session of at least compliance_hours on the day,
    'cumulative' accepts the day's sessions summing to it. Both are reported
    because the rule is ambiguous between them."""
    threshold_s = compliance_hours * 3600
    day_count = (window_to.date() - window_from.date()).days + 1
    all_days = [window_from.date() + timedelta(days=i) for i in range(max(day_count, 0))]

    per_dev: dict[str, DeveloperReport] = {}
    team = {
        "developers": 0, "sessions_count": 0, "shouts_count": 0,
        "total_session_seconds": 0, "mean_session_duration_s": 0.0,
    }
    for dev in store.developers():
        stats = compute_stats(store, sessions, dev.nick, window_from, window_to)
        runs = _window_sessions(store, sessions.cfg, dev.nick, window_from, window_to)
        by_day: dict[date, list[Session]] = {}
        for sess in runs:
            by_day.setdefault(sess.started_at.date(), []).append(sess)
        bad_single = []
        bad_cumulative = []
        for day in all_days:
            sessions_today = by_day.get(day, [])
            if not any(s.duration_s >= threshold_s for s in sessions_today):
                bad_single.append(day.isoformat())
            if sum(s.duration_s for s in sessions_today) < threshold_s:
                bad_cumulative.append(day.isoformat())
        per_dev[dev.nick] = DeveloperReport(
            stats=stats,
            non_compliant_days_single=bad_single,
            non_compliant_days_cumulative=bad_cumulative,
        )
        team["developers"] += 1
        team["sessions_count"] += stats.sessions_count
        team["shouts_count"] += stats.shouts_count
        team["total_session_seconds"] += stats.total_session_seconds
    if team["sessions_count"]:
        team["mean_session_duration_s"] = team["total_session_seconds"] / team["sessions_count"]
    return TeamReport(
        window_from=window_from,
        window_to=window_to,
        compliance_hours=compliance_hours,
        per_developer=per_dev,
        team=team,
    )


def render_report_text(report: TeamReport) -> str:
    """Plain-text table for the report CLI."""
    lines = [
        f"window {report.window_from:%Y-%m-%d %H:%M} .. {report.window_to:%Y-%m-%d %H:%M} UTC"
        f"  (compliance threshold {report.compliance_hours:g}h)",
        "",
        f"{'nick':<14} {'sessions':>8} {'shouts':>7} {'total_h':>8} "
        f"{'mean_min':>9} {'days':>5} {'miss(1x)':>9} {'miss(sum)':>10}",
    ]
    for nick, dev in sorted(report.per_developer.items()):
        s = dev.stats
        lines.append(
            f"{nick:<14} {s.sessions_count:>8} {s.shouts_count:>7} "
            f"{s.total_session_seconds / 3600:>8.2f} "
            f"{s.mean_session_duration_s / 60:>9.1f} {s.days_with_sessions:>5} "
            f"{len(dev.non_compliant_days_single):>9} "
            f"{len(dev.non_compliant_days_cumulative):>10}"
        )
    if not report.per_developer:
        lines.append("(no developers registered)")
    t = report.team
    if report.per_developer:
        lines.append("")
        lines.append(
            f"team: {t['developers']} developers, {t['sessions_count']} sessions, "
            f"{t['shouts_count']} shouts, {t['total_session_seconds'] / 3600:.2f}h total"
        )
    return "\n".join(lines)
