"""Build evaluation: score, planned forge actions, ticket bodies, progress event."""

from __future__ import annotations

import fnmatch
import hashlib
import os
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import AbstractSet

from .model import ExerciseManifest, TaskDef, TaskResult
from .runner import SequenceRun

COMPLETION_TITLE = "🎉 Exercise complete"

_FOOTER_RE = re.compile(r"<!-- profci:(?P<build>[^:\s]*):(?P<hash>[0-9a-f]{12}) -->\s*\Z")


class ActionKind(str, Enum):
    CREATE_ISSUE = "create_issue"
    COMMENT_ISSUE = "comment_issue"
    CREATE_COMPLETION_ISSUE = "create_completion_issue"


@dataclass(frozen=True)
class ForgeAction:
    kind: ActionKind
    title: str
    body: str

    def __post_init__(self):
        if not self.body.strip():
            raise ValueError("forge action body must not be empty")

    @property
    def marker(self) -> str | None:
        return footer_marker(self.body)


@dataclass(frozen=True)
class ProgressEvent:
    user: str
    score: int
    timestamp: datetime
    build_id: str
    commit_id: str

    def __post_init__(self):
        if self.score < 0:
            raise ValueError("score must be >= 0")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "score": self.score,
            "timestamp": format_timestamp(self.timestamp),
            "build_id": self.build_id,
            "commit_id": self.commit_id,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ProgressEvent":
        if not isinstance(obj, dict):
            raise ValueError("event must be an object")
        for key in ("user", "build_id", "commit_id", "timestamp"):
            if not isinstance(obj.get(key), str):
                raise ValueError(f"event field {key!r} must be a string")
        score = obj.get("score")
        if not isinstance(score, int) or isinstance(score, bool):
            raise ValueError("event field 'score' must be an integer")
        return cls(obj["user"], score, parse_timestamp(obj["timestamp"]), obj["build_id"], obj["commit_id"])


@dataclass(frozen=True)
class BuildMeta:
    user: str
    build_id: str
    commit_id: str
    now: datetime


class GateDecision(str, Enum):
    ADVANCE = "advance"
    HOLD = "hold"


@dataclass(frozen=True)
class Gate:
    decision: GateDecision
    message: str = ""

    @property
    def holds(self) -> bool:
        return self.decision is GateDecision.HOLD


@dataclass(frozen=True)
class EvaluationOutcome:
    score: int
    first_failure: tuple[str, TaskResult] | None
    completed: bool
    actions: tuple[ForgeAction, ...]
    event: ProgressEvent
    gate: Gate | None = None


# -- timestamps -------------------------------------------------------------

_RFC3339 = re.compile(
    r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$"
)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 instant and normalise it to UTC."""
    if not _RFC3339.match(text):
        raise ValueError(f"not an RFC 3339 timestamp: {text!r}")
    normalised = text[:-1] + "+00:00" if text[-1] in "Zz" else text
    frac = re.search(r"\.(\d+)", normalised)
    if frac and len(frac.group(1)) != 6:
        # fromisoformat on 3.10 wants exactly 3 or 6 fractional digits
        digits = (frac.group(1) + "000000")[:6]
        normalised = normalised[: frac.start(1)] + digits + normalised[frac.end(1):]
    return datetime.fromisoformat(normalised.replace("t", "T")).astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


# -- ticket bodies ----------------------------------------------------------


def title_hash(title: str) -> str:
    return hashlib.sha256(title.encode("utf-8")).hexdigest()[:12]


def footer(build_id: str, title: str) -> str:
    return f"<!-- profci:{build_id}:{title_hash(title)} -->"


def footer_marker(body: str) -> str | None:
    m = _FOOTER_RE.search(body)
    return m.group(0).strip() if m else None


def with_footer(body: str, build_id: str, title: str) -> str:
    return body.rstrip("\n") + "\n\n" + footer(build_id, title) + "\n"


def _fence_for(text: str) -> str:
    longest = max((len(m) for m in re.findall(r"`+", text)), default=0)
    return "`" * max(3, longest + 1)


def render_ticket_body(task: TaskDef, result: TaskResult) -> str:
    if result.passed:
        raise ValueError("tickets are only rendered for failing results")
    desc = result.description or task.description
    hints = result.hints or task.hints
    fence = _fence_for(result.message)
    lines = [
        f"**Given** {desc.given.strip()}",
        f"**When** {desc.when.strip()}",
        f"**Then** {desc.then.strip()}",
        "",
        fence,
        result.message.rstrip("\n"),
        fence,
    ]
    if hints:
        lines += ["", "### Hints", ""]
        lines += [f"- {hint}" for hint in hints]
    return "\n".join(lines) + "\n"


# -- test-growth gate -------------------------------------------------------

HOLD_MESSAGE = (
    "The next task is on hold: your test count did not grow ({previous} -> {current}). "
    "Commit a failing test that documents the missing feature first, then push again."
)


def test_growth_gate(previous_census: int, current_census: int, enabled: bool) -> Gate:
    if previous_census < 0 or current_census < 0:
        raise ValueError("census values must be >= 0")
    if enabled and current_census <= previous_census:
        return Gate(GateDecision.HOLD, HOLD_MESSAGE.format(previous=previous_census, current=current_census))
    return Gate(GateDecision.ADVANCE)


test_growth_gate.__test__ = False  # keep pytest from collecting it


class PatternInvalid(ValueError):
    pass


def census_student_tests(workspace: str | os.PathLike, file_glob: str, line_pattern: str) -> int:
    """Count lines matching ``line_pattern`` in files under ``workspace`` matching ``file_glob``."""
    if not file_glob:
        raise PatternInvalid("empty file glob")
    try:
        regex = re.compile(line_pattern)
    except re.error as exc:
        raise PatternInvalid(f"bad line pattern: {exc}") from None
    root = Path(workspace)
    if not root.is_dir():
        return 0
    count = 0
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        if not (fnmatch.fnmatchcase(rel, file_glob) or fnmatch.fnmatchcase(path.name, file_glob)):
            continue
        with open(path, encoding="utf-8", errors="replace") as fh:
            count += sum(1 for line in fh if regex.search(line))
    return count


# -- planning ---------------------------------------------------------------


def evaluate_build(
    sequence: SequenceRun,
    manifest: ExerciseManifest,
    forge_state: AbstractSet[str],
    build_meta: BuildMeta,
    gate: Gate | None = None,
    completion_title: str = COMPLETION_TITLE,
) -> EvaluationOutcome:
    """Plan at most one forge action for this build and produce its progress event.

    ``forge_state`` holds the titles of open issues, plus the completion title
    if a completion issue was ever created.
    """
    total = len(manifest.tasks)
    score = sequence.score
    first_failure = None
    actions: list[ForgeAction] = []

    if sequence.first_failure_index is not None:
        task = manifest.tasks[score]
        result = sequence.per_task[score].result
        first_failure = (task.id, result)
        body = with_footer(render_ticket_body(task, result), build_meta.build_id, task.title)
        if task.title in forge_state:
            actions.append(ForgeAction(ActionKind.COMMENT_ISSUE, task.title, body))
        elif gate is None or not gate.holds:
            actions.append(ForgeAction(ActionKind.CREATE_ISSUE, task.title, body))
    elif completion_title not in forge_state:
        body = with_footer(manifest.completion_body(), build_meta.build_id, completion_title)
        actions.append(ForgeAction(ActionKind.CREATE_COMPLETION_ISSUE, completion_title, body))

    event = ProgressEvent(
        user=build_meta.user,
        score=score,
        timestamp=build_meta.now,
        build_id=build_meta.build_id,
        commit_id=build_meta.commit_id,
    )
    return EvaluationOutcome(
        score=score,
        first_failure=first_failure,
        completed=first_failure is None,
        actions=tuple(actions),
        event=event,
        gate=gate,
    )

