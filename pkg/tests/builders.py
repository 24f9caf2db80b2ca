"""Small constructors shared by the test modules."""

from datetime import datetime, timedelta, timezone

from profci.evaluator import BuildMeta
from profci.model import ExerciseManifest, GivenWhenThen, Status, TaskDef, TaskResult
from profci.runner import SequenceRun, TaskRun

T0 = datetime(2016, 10, 24, 9, 0, tzinfo=timezone.utc)


def manifest_of(n, survey_url="https://example.org/survey", hints=()):
    tasks = tuple(
        TaskDef(
            id=f"t{i:02d}",
            title=f"Feature {i:02d}",
            description=GivenWhenThen(f"context {i}", f"action {i}", f"outcome {i}"),
            hints=tuple(hints),
            command=("check", f"t{i:02d}"),
        )
        for i in range(n)
    )
    return ExerciseManifest("synthetic", tasks, ("true",), survey_url=survey_url)


def sequence_from(passes, manifest, message="expected something else"):
    """Fail-fast run over ``passes``: stops after the first False."""
    runs = []
    first = None
    for i, ok in enumerate(passes):
        task = manifest.tasks[i]
        result = TaskResult(
            id=task.id,
            title=task.title,
            status=Status.PASS if ok else Status.FAIL,
            description=task.description,
            message="" if ok else message,
            hints=task.hints,
        )
        runs.append(TaskRun(task.id, result, 0 if ok else 1, "", 0.0))
        if not ok:
            first = i
            break
    return SequenceRun(tuple(runs), first, len(runs), len(manifest.tasks))


def solved_upto(k, manifest):
    n = len(manifest.tasks)
    return sequence_from([True] * k + [False] * (n > k), manifest)


def meta(n=0, user="alice", minutes=None):
    at = T0 + timedelta(minutes=10 * n if minutes is None else minutes)
    return BuildMeta(user=user, build_id=f"b{n}", commit_id=f"c{n:04x}", now=at)
