"""Progress series, active time, time-per-task matrix, punch cards, stuck users."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence, Union
from zoneinfo import ZoneInfo

from ..evaluator import ProgressEvent
from .events import EventLog

INACTIVITY_MINUTES = 60
RESUMPTION_MINUTES = 15

Instant = Union[datetime, int, float]


class BoundsNotBuilds(ValueError):
    pass


class InconsistentLog(ValueError):
    pass


@dataclass(frozen=True)
class TimeMatrix:
    users: tuple[str, ...]
    tasks: tuple[str, ...]
    # None marks a task that was never handed out to the user
    cells: Mapping[tuple[str, str], float | None]

    def cell(self, user: str, task: str) -> float | None:
        return self.cells[(user, task)]

    def row(self, user: str) -> list[float | None]:
        return [self.cells[(user, t)] for t in self.tasks]


@dataclass(frozen=True)
class PunchCard:
    counts: tuple[tuple[int, ...], ...]  # [weekday Mon=0][hour]
    timezone: str = "UTC"

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class SeriesSet:
    series: Mapping[str, tuple[tuple[datetime, int], ...]]


@dataclass(frozen=True)
class StuckUser:
    user: str
    task_id: str
    stalled_minutes: float
    solver_count: int


def _events(source: EventLog | Iterable[ProgressEvent]) -> list[ProgressEvent]:
    if isinstance(source, EventLog):
        return source.events()
    return list(source)


def _by_user(events: Iterable[ProgressEvent]) -> dict[str, list[ProgressEvent]]:
    grouped: dict[str, list[ProgressEvent]] = {}
    for event in events:
        grouped.setdefault(event.user, []).append(event)
    for user_events in grouped.values():
        user_events.sort(key=lambda e: e.timestamp)  # stable: ties keep input order
    return grouped


def _gap_minutes(a: Instant, b: Instant) -> float:
    if isinstance(a, datetime):
        return (b - a).total_seconds() / 60.0
    return float(b - a)


def gap_credit(minutes: float) -> float:
    return minutes if minutes <= INACTIVITY_MINUTES else float(RESUMPTION_MINUTES)


def active_time(builds: Sequence[Instant], start: Instant, end: Instant) -> float:
    """Active minutes between two builds.

    Each gap between consecutive builds counts fully up to an hour; a longer
    gap counts as a fixed resumption credit. ``builds`` must be sorted and
    contain both bounds.
    """
    lo = bisect.bisect_left(builds, start)
    if lo == len(builds) or builds[lo] != start:
        raise BoundsNotBuilds(f"start {start!r} is not a build")
    hi = bisect.bisect_right(builds, end) - 1
    if hi < 0 or builds[hi] != end:
        raise BoundsNotBuilds(f"end {end!r} is not a build")
    if end < start:
        raise ValueError("start must not be after end")
    return sum(gap_credit(_gap_minutes(builds[i], builds[i + 1])) for i in range(lo, hi))


def progress_series(source: EventLog | Iterable[ProgressEvent], user: str) -> list[tuple[datetime, int]]:
    if isinstance(source, EventLog):
        events = source.for_user(user)
    else:
        events = _by_user(e for e in source if e.user == user).get(user, [])
    return [(e.timestamp, e.score) for e in events]


def series_set(source: EventLog | Iterable[ProgressEvent]) -> SeriesSet:
    grouped = _by_user(_events(source))
    return SeriesSet({u: tuple((e.timestamp, e.score) for e in grouped[u]) for u in sorted(grouped)})


def _build_list(
    user: str,
    events: Sequence[ProgressEvent],
    builds_per_user: Mapping[str, Iterable[datetime]] | None,
    strict: bool,
) -> list[datetime]:
    builds = set(builds_per_user.get(user, ())) if builds_per_user else set()
    stamps = {e.timestamp for e in events}
    if builds_per_user is not None and strict:
        missing = stamps - builds
        if missing:
            raise InconsistentLog(f"{user}: event at {min(missing)} has no matching build")
    return sorted(builds | stamps)


def time_per_task(
    source: EventLog | Iterable[ProgressEvent],
    task_ids: Sequence[str],
    builds_per_user: Mapping[str, Iterable[datetime]] | None = None,
    strict: bool = False,
) -> TimeMatrix:
    """Active minutes each user spent on each task.

    The task a user works on is their current first failure (score k means
    task k). A task is handed out when it first becomes current and the
    episode ends when the score moves; minutes from all episodes of a task
    add up. Tasks never current for a user stay blank, and an episode still
    open at the end runs to the user's last build.
    """
    n = len(task_ids)
    grouped = _by_user(_events(source))
    cells: dict[tuple[str, str], float | None] = {}
    for user in sorted(grouped):
        events = grouped[user]
        builds = _build_list(user, events, builds_per_user, strict)
        if strict and events[0].score > 0:
            raise InconsistentLog(f"{user}: tasks below {events[0].score} completed without hand-out")
        minutes: list[float | None] = [None] * n
        current: int | None = None
        since: datetime | None = None
        for event in events:
            score = event.score
            if score > n:
                if strict:
                    raise InconsistentLog(f"{user}: score {score} exceeds task count {n}")
                score = n
            if score == current:
                continue
            if current is not None:
                minutes[current] += active_time(builds, since, event.timestamp)
            current = score if score < n else None
            since = event.timestamp
            if current is not None and minutes[current] is None:
                minutes[current] = 0.0
        if current is not None:
            minutes[current] += active_time(builds, since, builds[-1])
        for task, value in zip(task_ids, minutes):
            cells[(user, task)] = value
    return TimeMatrix(users=tuple(sorted(grouped)), tasks=tuple(task_ids), cells=cells)


def punch_card(commits: Iterable[datetime], tz: str = "UTC") -> PunchCard:
    zone = ZoneInfo(tz)
    grid = [[0] * 24 for _ in range(7)]
    for ts in commits:
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        local = ts.astimezone(zone)
        grid[local.weekday()][local.hour] += 1
    return PunchCard(tuple(tuple(row) for row in grid), tz)


def flag_stuck_users(
    source: EventLog | Iterable[ProgressEvent],
    now: datetime,
    stall_threshold: float,
    task_ids: Sequence[str],
    builds_per_user: Mapping[str, Iterable[datetime]] | None = None,
) -> list[StuckUser]:
    """Users whose score has not moved for ``stall_threshold`` active minutes.

    ``now`` counts as a build, so a silent stretch before it earns only the
    resumption credit. The solver count is how many other users already got
    past the task.
    """
    if stall_threshold <= 0:
        raise ValueError("stall threshold must be positive")
    n = len(task_ids)
    grouped = _by_user(e for e in _events(source) if e.timestamp <= now)
    latest = {user: events[-1].score for user, events in grouped.items()}
    flagged = []
    for user in sorted(grouped):
        events = grouped[user]
        score = latest[user]
        if score >= n:
            continue
        i = len(events) - 1
        while i > 0 and events[i - 1].score == score:
            i -= 1
        builds = [b for b in _build_list(user, events, builds_per_user, False) if b <= now]
        if builds[-1] != now:
            builds.append(now)
        stalled = active_time(builds, events[i].timestamp, now)
        if stalled >= stall_threshold:
            solvers = sum(1 for other, s in latest.items() if other != user and s > score)
            flagged.append(StuckUser(user, task_ids[score], stalled, solvers))
    return flagged
