"""Exercise manifest and the line-oriented test-result interchange format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

RESULT_SENTINEL = "##PROFCI## "


class ManifestError(ValueError):
    """Base class for manifest problems."""


class MalformedDocument(ManifestError):
    pass


class SchemaViolation(ManifestError):
    def __init__(self, path: str, problem: str):
        self.path = path
        self.problem = problem
        super().__init__(f"{path} {problem}")


class MalformedResultLine(ValueError):
    def __init__(self, line_number: int, reason: str = ""):
        self.line_number = line_number
        super().__init__(f"malformed result line {line_number}" + (f": {reason}" if reason else ""))


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"


@dataclass(frozen=True)
class GivenWhenThen:
    given: str
    when: str
    then: str

    def __post_init__(self):
        for clause in ("given", "when", "then"):
            value = getattr(self, clause)
            if not isinstance(value, str) or not value.strip():
                raise SchemaViolation(clause, "empty clause")


@dataclass(frozen=True)
class TaskDef:
    id: str
    title: str
    description: GivenWhenThen
    hints: tuple[str, ...] = ()
    command: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExerciseManifest:
    exercise_name: str
    tasks: tuple[TaskDef, ...]
    student_suite_command: tuple[str, ...]
    completion_body_template: str = "All feature tests pass. Please fill out the survey: {survey_url}"
    survey_url: str = ""
    report_endpoint: str | None = None

    def index_of(self, task_id: str) -> int:
        for i, task in enumerate(self.tasks):
            if task.id == task_id:
                return i
        raise KeyError(task_id)

    def completion_body(self) -> str:
        body = self.completion_body_template.replace("{survey_url}", self.survey_url)
        if self.survey_url and self.survey_url not in body:
            body = body.rstrip("\n") + "\n\n" + self.survey_url
        return body


@dataclass(frozen=True)
class TaskResult:
    id: str
    title: str
    status: Status
    description: GivenWhenThen | None
    message: str = ""
    hints: tuple[str, ...] = ()

    def __post_init__(self):
        if self.status is Status.PASS and self.message:
            raise ValueError("passing result must not carry a message")
        if self.status is not Status.PASS and not self.message:
            raise ValueError("failing result needs a message")

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS


# -- manifest ---------------------------------------------------------------


def _require_str(obj: dict, key: str, path: str, allow_empty: bool = False) -> str:
    if key not in obj:
        raise SchemaViolation(f"{path}{key}", "missing")
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaViolation(f"{path}{key}", "must be a string")
    if not allow_empty and not value.strip():
        raise SchemaViolation(f"{path}{key}", "empty")
    return value


def _require_command(obj: dict, key: str, path: str) -> tuple[str, ...]:
    if key not in obj:
        raise SchemaViolation(f"{path}{key}", "missing")
    value = obj[key]
    if (
        not isinstance(value, list)
        or not value
        or not all(isinstance(part, str) for part in value)
    ):
        raise SchemaViolation(f"{path}{key}", "must be a non-empty list of strings")
    return tuple(value)


def _parse_task(obj: Any, path: str) -> TaskDef:
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "must be an object")
    prefix = path + "."
    task_id = _require_str(obj, "id", prefix)
    title = _require_str(obj, "title", prefix)
    clauses = {}
    for clause in ("given", "when", "then"):
        clauses[clause] = _require_str(obj, clause, prefix)
    hints = obj.get("hints", [])
    if not isinstance(hints, list) or not all(isinstance(h, str) for h in hints):
        raise SchemaViolation(f"{prefix}hints", "must be a list of strings")
    return TaskDef(
        id=task_id,
        title=title,
        description=GivenWhenThen(**clauses),
        hints=tuple(hints),
        command=_require_command(obj, "command", prefix),
    )


def parse_manifest(document: str) -> ExerciseManifest:
    """Parse and validate a JSON manifest document.

    Unknown keys are ignored. Raises MalformedDocument when the text is not a
    JSON object and SchemaViolation (carrying the offending path) otherwise.
    """
    try:
        data = json.loads(document)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedDocument("top level must be a JSON object")

    name = _require_str(data, "exercise_name", "")
    raw_tasks = data.get("tasks", [])
    if not isinstance(raw_tasks, list):
        raise SchemaViolation("tasks", "must be a list")
    tasks = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_tasks):
        task = _parse_task(raw, f"tasks[{i}]")
        if task.id in seen:
            raise SchemaViolation(f"tasks[{i}].id", "duplicate")
        seen.add(task.id)
        tasks.append(task)

    template = data.get("completion_body_template", ExerciseManifest.completion_body_template)
    if not isinstance(template, str) or not template.strip():
        raise SchemaViolation("completion_body_template", "must be a non-empty string")
    survey_url = data.get("survey_url", "")
    if not isinstance(survey_url, str):
        raise SchemaViolation("survey_url", "must be a string")
    endpoint = data.get("report_endpoint")
    if endpoint is not None and not isinstance(endpoint, str):
        raise SchemaViolation("report_endpoint", "must be a string or null")

    return ExerciseManifest(
        exercise_name=name,
        tasks=tuple(tasks),
        student_suite_command=_require_command(data, "student_suite_command", ""),
        completion_body_template=template,
        survey_url=survey_url,
        report_endpoint=endpoint or None,
    )


def manifest_to_dict(manifest: ExerciseManifest) -> dict:
    return {
        "exercise_name": manifest.exercise_name,
        "tasks": [
            {
                "id": t.id,
                "title": t.title,
                "given": t.description.given,
                "when": t.description.when,
                "then": t.description.then,
                "hints": list(t.hints),
                "command": list(t.command),
            }
            for t in manifest.tasks
        ],
        "student_suite_command": list(manifest.student_suite_command),
        "completion_body_template": manifest.completion_body_template,
        "survey_url": manifest.survey_url,
        "report_endpoint": manifest.report_endpoint,
    }


def serialize_manifest(manifest: ExerciseManifest) -> str:
    return json.dumps(manifest_to_dict(manifest), indent=2, ensure_ascii=False) + "\n"


# -- result interchange -----------------------------------------------------


def format_result_line(result: TaskResult) -> str:
    desc = result.description
    payload = {
        "id": result.id,
        "title": result.title,
        "status": result.status.value,
        "given": desc.given if desc else "",
        "when": desc.when if desc else "",
        "then": desc.then if desc else "",
        "message": result.message,
        "hints": list(result.hints),
    }
    return RESULT_SENTINEL + json.dumps(payload, ensure_ascii=False) + "\n"


def _parse_result_payload(payload: str, line_number: int) -> TaskResult:
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedResultLine(line_number, str(exc)) from None
    if not isinstance(obj, dict):
        raise MalformedResultLine(line_number, "payload is not an object")
    for key in ("id", "status"):
        if not isinstance(obj.get(key), str):
            raise MalformedResultLine(line_number, f"missing {key}")
    try:
        status = Status(obj["status"])
    except ValueError:
        raise MalformedResultLine(line_number, f"unknown status {obj['status']!r}") from None

    strings = {}
    for key in ("title", "given", "when", "then", "message"):
        value = obj.get(key, "")
        if not isinstance(value, str):
            raise MalformedResultLine(line_number, f"{key} must be a string")
        strings[key] = value
    hints = obj.get("hints", [])
    if not isinstance(hints, list) or not all(isinstance(h, str) for h in hints):
        raise MalformedResultLine(line_number, "hints must be a list of strings")

    # adapters may omit the description; the runner fills it from the TaskDef
    try:
        description = GivenWhenThen(strings["given"], strings["when"], strings["then"])
    except SchemaViolation:
        description = None
    message = strings["message"]
    if status is Status.PASS:
        message = ""
    elif not message.strip():
        message = f"feature test reported {status.value} without a message"
    return TaskResult(
        id=obj["id"],
        title=strings["title"],
        status=status,
        description=description,
        message=message,
        hints=tuple(hints),
    )


def parse_result_stream(text: str) -> list[TaskResult]:
    """Collect sentinel-prefixed result lines, skipping any other output."""
    results = []
    for number, line in enumerate(text.split("\n"), start=1):
        if not line.startswith(RESULT_SENTINEL):
            continue
        results.append(_parse_result_payload(line[len(RESULT_SENTINEL):], number))
    return results
