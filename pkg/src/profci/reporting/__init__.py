"""Educator analytics over progress events and commit timestamps."""

from .analytics import (
    BoundsNotBuilds,
    InconsistentLog,
    PunchCard,
    SeriesSet,
    StuckUser,
    TimeMatrix,
    active_time,
    flag_stuck_users,
    progress_series,
    punch_card,
    series_set,
    time_per_task,
)
from .events import (
    Ack,
    EventLog,
    IngestServer,
    ReportRejected,
    ReportUnavailable,
    StorageFailure,
    ingest_event,
    load_log,
    post_event,
    read_commits,
    read_events,
    write_commits,
    write_events,
)
from .render import UnsupportedCombination, render_report

__all__ = [
    "Ack",
    "BoundsNotBuilds",
    "EventLog",
    "InconsistentLog",
    "IngestServer",
    "PunchCard",
    "ReportRejected",
    "ReportUnavailable",
    "SeriesSet",
    "StorageFailure",
    "StuckUser",
    "TimeMatrix",
    "UnsupportedCombination",
    "active_time",
    "flag_stuck_users",
    "ingest_event",
    "load_log",
    "post_event",
    "progress_series",
    "punch_card",
    "read_commits",
    "read_events",
    "render_report",
    "series_set",
    "time_per_task",
    "write_commits",
    "write_events",
]
