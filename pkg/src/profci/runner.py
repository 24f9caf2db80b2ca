"""Subprocess execution of the student suite and the hidden feature sequence."""

from __future__ import annotations

import logging
import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .model import (
    ExerciseManifest,
    MalformedResultLine,
    Status,
    TaskDef,
    TaskResult,
    parse_result_stream,
)

log = logging.getLogger(__name__)

MAX_CAPTURE = 64 * 1024
TRUNCATION_NOTICE = "[... earlier output truncated ...]\n"
DEFAULT_TASK_TIMEOUT = 300.0
FALLBACK_LINES = 20
FALLBACK_CHARS = 4000


class RunnerError(RuntimeError):
    pass


class SpawnFailure(RunnerError):
    pass


class TimeoutExceeded(RunnerError):
    def __init__(self, seconds: float, output: str = ""):
        self.seconds = seconds
        self.output = output
        super().__init__(f"timed out after {seconds:g} s")


@dataclass(frozen=True)
class SuiteRun:
    exit_status: int
    captured_output: str
    duration: float

    @property
    def ok(self) -> bool:
        return self.exit_status == 0


@dataclass(frozen=True)
class TaskRun:
    task_id: str
    result: TaskResult
    exit_status: int | None
    output: str
    duration: float
    timed_out: bool = False


@dataclass(frozen=True)
class SequenceRun:
    per_task: tuple[TaskRun, ...]
    first_failure_index: int | None
    executed_count: int
    total: int

    @property
    def score(self) -> int:
        return self.total if self.first_failure_index is None else self.first_failure_index

    def comparable(self) -> tuple:
        """Fields that must repeat across runs on an unchanged workspace."""
        return (
            tuple((r.task_id, r.result, r.exit_status) for r in self.per_task),
            self.first_failure_index,
            self.executed_count,
        )


def bound_output(text: str, limit: int = MAX_CAPTURE) -> str:
    """Keep the tail of ``text`` so the result is at most ``limit`` characters."""
    if len(text) <= limit:
        return text
    keep = limit - len(TRUNCATION_NOTICE)
    return TRUNCATION_NOTICE + text[-keep:]


def _decode(data: bytes | str | None) -> str:
    if data is None:
        return ""
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data


def _execute(
    command: Sequence[str],
    workspace: Path,
    timeout: float,
    env: Mapping[str, str] | None,
) -> tuple[int, str, float]:
    if not command:
        raise SpawnFailure("empty command")
    if not Path(workspace).is_dir():
        raise SpawnFailure(f"workspace {workspace} is not a directory")
    start = time.monotonic()
    try:
        proc = subprocess.run(
            list(command),
            cwd=workspace,
            env=dict(env) if env is not None else None,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        # subprocess.run has already killed and reaped the child here
        raise TimeoutExceeded(timeout, bound_output(_decode(exc.output))) from None
    except (FileNotFoundError, PermissionError, NotADirectoryError, OSError) as exc:
        raise SpawnFailure(f"cannot execute {command[0]!r}: {exc.strerror or exc}") from None
    duration = time.monotonic() - start
    return proc.returncode, bound_output(_decode(proc.stdout)), duration


def run_student_suite(
    workspace: str | os.PathLike,
    command: Sequence[str],
    timeout: float = DEFAULT_TASK_TIMEOUT,
    env: Mapping[str, str] | None = None,
) -> SuiteRun:
    """Run the student's own tests; a nonzero exit is a result, not an error."""
    status, output, duration = _execute(command, Path(workspace), timeout, env)
    return SuiteRun(exit_status=status, captured_output=output, duration=duration)


def output_tail(output: str, lines: int = FALLBACK_LINES, chars: int = FALLBACK_CHARS) -> str:
    tail = "\n".join(output.rstrip("\n").splitlines()[-lines:])
    return tail[-chars:]


def _synthesize(task: TaskDef, status: Status, message: str) -> TaskResult:
    if status is not Status.PASS and not message.strip():
        message = "feature test failed without output"
    return TaskResult(
        id=task.id,
        title=task.title,
        status=status,
        description=task.description,
        message="" if status is Status.PASS else message,
        hints=task.hints,
    )


def _complete(task: TaskDef, reported: TaskResult, status: Status, fallback: str) -> TaskResult:
    """Merge a reported result with its TaskDef; exit status decides pass/fail."""
    if status is Status.PASS:
        message = ""
    elif reported.status is Status.PASS:
        # adapter claimed success but the process failed
        message = fallback or "feature test exited nonzero"
    else:
        message = reported.message
    return TaskResult(
        id=task.id,
        title=reported.title or task.title,
        status=status,
        description=reported.description or task.description,
        message=message,
        hints=reported.hints or task.hints,
    )


def interpret_task_output(task: TaskDef, exit_status: int, output: str) -> TaskResult:
    """Build the TaskResult for one finished feature-test process."""
    fallback = output_tail(output)
    try:
        reported = [r for r in parse_result_stream(output) if r.id == task.id]
    except MalformedResultLine as exc:
        return _synthesize(task, Status.ERROR, f"{exc}\n{fallback}".strip())

    last = reported[-1] if reported else None
    if exit_status != 0:
        status = last.status if last is not None and not last.passed else Status.FAIL
    elif last is not None and not last.passed:
        status = last.status
    else:
        status = Status.PASS

    if last is None:
        return _synthesize(task, status, fallback)
    return _complete(task, last, status, fallback)


def expand_command(command: Sequence[str], substitutions: Mapping[str, str]) -> list[str]:
    out = []
    for part in command:
        for key, value in substitutions.items():
            part = part.replace("{" + key + "}", value)
        out.append(part)
    return out


def run_feature_sequence(
    workspace: str | os.PathLike,
    manifest: ExerciseManifest,
    timeout_per_task: float = DEFAULT_TASK_TIMEOUT,
    env: Mapping[str, str] | None = None,
    substitutions: Mapping[str, str] | None = None,
) -> SequenceRun:
    """Run hidden tasks in manifest order, stopping after the first failure."""
    base_env = dict(os.environ if env is None else env)
    subs = dict(substitutions or {})
    runs: list[TaskRun] = []
    first_failure = None
    for index, task in enumerate(manifest.tasks):
        task_env = dict(base_env, PROFCI_TASK_ID=task.id)
        command = expand_command(task.command, subs)
        log.debug("running task %s: %s", task.id, command[0])
        try:
            status, output, duration = _execute(command, Path(workspace), timeout_per_task, task_env)
        except TimeoutExceeded as exc:
            result = _synthesize(task, Status.FAIL, str(exc))
            runs.append(TaskRun(task.id, result, None, exc.output, float(timeout_per_task), True))
            first_failure = index
            break
        result = interpret_task_output(task, status, output)
        runs.append(TaskRun(task.id, result, status, output, duration))
        if not result.passed:
            first_failure = index
            break
    return SequenceRun(
        per_task=tuple(runs),
        first_failure_index=first_failure,
        executed_count=len(runs),
        total=len(manifest.tasks),
    )
