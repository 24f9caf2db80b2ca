"""Append-only progress-event log, its HTTP ingestion endpoint, and a posting client."""

from __future__ import annotations

import bisect
import csv
import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable

import httpx

from ..evaluator import ProgressEvent, format_timestamp, parse_timestamp
from ..retry import Unavailable, with_retries

log = logging.getLogger(__name__)


class StorageFailure(RuntimeError):
    pass


class ReportUnavailable(Unavailable):
    pass


class ReportRejected(RuntimeError):
    pass


class Ack(str, Enum):
    APPENDED = "appended"
    DUPLICATE = "duplicate"


@dataclass(frozen=True)
class _Entry:
    seq: int
    event: ProgressEvent

    @property
    def key(self):
        return (self.event.timestamp, self.seq)


class EventLog:
    """Progress events, deduplicated on (user, build_id).

    With a ``path`` every accepted event is appended to a JSON-lines file
    before it becomes visible. Appends are serialized by one lock; readers get
    immutable snapshots.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._entries: list[_Entry] = []
        self._by_user: dict[str, list[_Entry]] = {}
        self._keys: set[tuple[str, str]] = set()
        if self.path is not None and self.path.exists():
            for event in read_events(self.path):
                self._add(event)

    def __len__(self) -> int:
        return len(self._entries)

    def _add(self, event: ProgressEvent) -> bool:
        key = (event.user, event.build_id)
        if key in self._keys:
            return False
        self._keys.add(key)
        entry = _Entry(len(self._entries), event)
        self._entries.append(entry)
        bucket = self._by_user.setdefault(event.user, [])
        # seq grows monotonically, so equal timestamps keep ingestion order
        bisect.insort(bucket, entry, key=lambda e: e.key)
        return True

    def ingest(self, event: ProgressEvent) -> Ack:
        with self._lock:
            if (event.user, event.build_id) in self._keys:
                return Ack.DUPLICATE
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
                        fh.flush()
                except OSError as exc:
                    raise StorageFailure(f"cannot append to event file: {exc}") from None
            self._add(event)
            return Ack.APPENDED

    def events(self) -> list[ProgressEvent]:
        """All events sorted by (user, timestamp), ties in ingestion order."""
        with self._lock:
            return [e.event for user in sorted(self._by_user) for e in self._by_user[user]]

    def users(self) -> list[str]:
        with self._lock:
            return sorted(self._by_user)

    def for_user(self, user: str) -> list[ProgressEvent]:
        with self._lock:
            return [e.event for e in self._by_user.get(user, [])]


def ingest_event(log_: EventLog, event: ProgressEvent) -> Ack:
    return log_.ingest(event)


def read_events(path: str | Path) -> list[ProgressEvent]:
    """Load a JSON-lines event file; raises ValueError naming the bad line."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                events.append(ProgressEvent.from_dict(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{number}: {exc}") from None
    return events


def load_log(paths: Iterable[str | Path]) -> EventLog:
    log_ = EventLog()
    for path in paths:
        for event in read_events(path):
            log_.ingest(event)
    return log_


def write_events(events: Iterable[ProgressEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")


# -- HTTP ingestion ---------------------------------------------------------


class _IngestHandler(BaseHTTPRequestHandler):
    server: "IngestServer"

    def log_message(self, format, *args):  # noqa: A002
        log.debug("ingest: " + format, *args)

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):  # noqa: N802
        if self.path.rstrip("/") != "/events":
            self._reply(404, {"error": "not found"})
            return
        token = self.server.token
        if token and self.headers.get("Authorization") != f"Bearer {token}":
            self._reply(401, {"error": "unauthorized"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        try:
            event = ProgressEvent.from_dict(json.loads(self.rfile.read(length) or b"null"))
        except (ValueError, TypeError) as exc:
            self._reply(400, {"error": str(exc)})
            return
        try:
            ack = self.server.log.ingest(event)
        except StorageFailure as exc:
            self._reply(500, {"error": str(exc)})
            return
        self._reply(201 if ack is Ack.APPENDED else 200, {"status": ack.value})


class IngestServer(ThreadingHTTPServer):
    """``POST /events`` endpoint in front of an EventLog."""

    daemon_threads = True

    def __init__(self, log_: EventLog, token: str = "", address=("127.0.0.1", 0)):
        super().__init__(address, _IngestHandler)
        self.log = log_
        self.token = token
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}/events"

    def __enter__(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.shutdown()
        self.server_close()


def post_event(
    url: str,
    event: ProgressEvent,
    token: str = "",
    client: httpx.Client | None = None,
    sleep=None,
) -> Ack:
    """Send one event to an ingestion endpoint, retrying transient failures."""
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    own_client = client is None
    client = client or httpx.Client(timeout=30.0)

    def attempt() -> Ack:
        try:
            response = client.post(url, json=event.to_dict(), headers=headers)
        except httpx.HTTPError as exc:
            raise ReportUnavailable(f"report endpoint unreachable: {type(exc).__name__}") from None
        if response.status_code in (401, 403):
            raise ReportRejected(f"report endpoint rejected credentials (HTTP {response.status_code})")
        if response.status_code >= 500:
            raise ReportUnavailable(f"report endpoint returned HTTP {response.status_code}")
        if response.status_code == 201:
            return Ack.APPENDED
        if response.status_code == 200:
            return Ack.DUPLICATE
        raise ReportRejected(f"report endpoint returned HTTP {response.status_code}")

    try:
        kwargs = {"sleep": sleep} if sleep is not None else {}
        return with_retries(attempt, **kwargs)
    finally:
        if own_client:
            client.close()


# -- commit timestamps ------------------------------------------------------

COMMIT_HEADER = ("user", "commit_id", "timestamp")


def read_commits(path: str | Path) -> list[tuple[str, str, datetime]]:
    """Read ``user,commit_id,timestamp`` rows; a header row is optional."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for number, row in enumerate(csv.reader(fh), start=1):
            if not row or (number == 1 and tuple(c.strip() for c in row) == COMMIT_HEADER):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{number}: expected 3 columns, got {len(row)}")
            try:
                rows.append((row[0], row[1], parse_timestamp(row[2].strip())))
            except ValueError as exc:
                raise ValueError(f"{path}:{number}: {exc}") from None
    return rows


def write_commits(commits, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMMIT_HEADER)
        for user, commit_id, ts in commits:
            writer.writerow([user, commit_id, format_timestamp(ts)])
