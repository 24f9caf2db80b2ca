"""Seeded discrete-event classroom simulator.

Each student works through the task sequence in virtual time. Every green
build goes through :func:`evaluate_build` and a per-student :class:`FakeForge`,
so the generated events and forge transcripts obey the same rules as real
CI runs.

Randomness comes only from ``random.Random(seed).random()`` (MT19937, whose
output for a given integer seed is fixed across Python versions); every other
draw is derived from those uniforms with explicit formulas below.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .evaluator import (
    COMPLETION_TITLE,
    BuildMeta,
    ProgressEvent,
    evaluate_build,
    format_timestamp,
)
from .forge import FakeForge
from .model import ExerciseManifest, GivenWhenThen, Status, TaskDef, TaskResult
from .reporting.events import write_commits, write_events
from .runner import SequenceRun, TaskRun

EPOCH = datetime(2016, 10, 24, 9, 0, tzinfo=timezone.utc)  # a Monday morning
MAX_START_OFFSET = 180
WIP_CHUNK_MIN, WIP_CHUNK_SPAN = 20, 25
SHORT_BREAK_MIN, SHORT_BREAK_SPAN = 61, 180
OVERNIGHT_MIN, OVERNIGHT_SPAN = 12 * 60, 4 * 60
REPAIR_FRACTION = 1 / 3


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    student_count: int = 30
    task_count: int = 25
    seed: int = 0
    mean_task_minutes: float = 40.0
    regression_probability: float = 0.05
    anticipation_probability: float = 0.1
    break_probability: float = 0.1
    session_hours: float = 3.0

    def validate(self) -> None:
        if not isinstance(self.student_count, int) or self.student_count < 1:
            raise ConfigInvalid("student_count must be an integer >= 1")
        if not isinstance(self.task_count, int) or self.task_count < 1:
            raise ConfigInvalid("task_count must be an integer >= 1")
        if not isinstance(self.seed, int):
            raise ConfigInvalid("seed must be an integer")
        if not self.mean_task_minutes > 0:
            raise ConfigInvalid("mean_task_minutes must be positive")
        if not self.session_hours > 0:
            raise ConfigInvalid("session_hours must be positive")
        for name in ("regression_probability", "anticipation_probability", "break_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigInvalid(f"{name} must be within [0, 1]")


@dataclass(frozen=True)
class TaskTruth:
    task_id: str
    handout: datetime | None
    completion: datetime | None
    anticipated: bool = False


@dataclass(frozen=True)
class TranscriptEntry:
    user: str
    build_id: str
    kind: str
    title: str
    issue_number: int


@dataclass
class SimOutcome:
    config: SimConfig
    manifest: ExerciseManifest
    events: list[ProgressEvent]
    commits: list[tuple[str, str, datetime]]
    traces: dict[str, list[tuple[datetime, int]]]
    ground_truth: dict[str, list[TaskTruth]]
    forge_transcript: list[TranscriptEntry]
    forges: dict[str, FakeForge] = field(repr=False)

    @property
    def task_ids(self) -> list[str]:
        return [t.id for t in self.manifest.tasks]

    def builds_per_user(self) -> dict[str, list[datetime]]:
        builds: dict[str, list[datetime]] = {}
        for user, _, ts in self.commits:
            builds.setdefault(user, []).append(ts)
        return {u: sorted(b) for u, b in builds.items()}

    def anticipated(self) -> set[tuple[str, str]]:
        return {(u, t.task_id) for u, truths in self.ground_truth.items() for t in truths if t.anticipated}

    def ground_truth_json(self) -> dict:
        def ts(x):
            return format_timestamp(x) if x is not None else None

        return {
            user: {
                "trace": [[ts(t), score] for t, score in self.traces[user]],
                "tasks": [
                    {
                        "task": t.task_id,
                        "handout": ts(t.handout),
                        "completion": ts(t.completion),
                        "anticipated": t.anticipated,
                    }
                    for t in self.ground_truth[user]
                ],
            }
            for user in sorted(self.ground_truth)
        }

    def transcript_json(self) -> list[dict]:
        return [
            {
                "user": e.user,
                "build_id": e.build_id,
                "kind": e.kind,
                "title": e.title,
                "issue": e.issue_number,
            }
            for e in self.forge_transcript
        ]


ARTIFACTS = ("events.jsonl", "commits.csv", "ground_truth.json", "forge_transcript.json")


def write_outcome(outcome: SimOutcome, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / name for name in ARTIFACTS]
    write_events(outcome.events, paths[0])
    write_commits(outcome.commits, paths[1])
    for path, payload in ((paths[2], outcome.ground_truth_json()), (paths[3], outcome.transcript_json())):
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return paths


def simulation_manifest(task_count: int) -> ExerciseManifest:
    tasks = tuple(
        TaskDef(
            id=f"t{k + 1:02d}",
            title=f"Feature {k + 1:02d}",
            description=GivenWhenThen(
                given=f"the shop with features 1-{k} in place",
                when=f"a visitor uses feature {k + 1}",
                then=f"feature {k + 1} behaves as specified",
            ),
            command=("true",),
        )
        for k in range(task_count)
    )
    return ExerciseManifest(
        exercise_name="simulated exercise",
        tasks=tasks,
        student_suite_command=("true",),
        survey_url="https://example.org/survey",
    )


def _sequence_for(solved: set[int], manifest: ExerciseManifest) -> SequenceRun:
    """What the runner would report for a workspace passing exactly ``solved``."""
    runs = []
    first_failure = None
    for index, task in enumerate(manifest.tasks):
        if index in solved:
            result = TaskResult(task.id, task.title, Status.PASS, task.description, "", task.hints)
            runs.append(TaskRun(task.id, result, 0, "", 0.0))
            continue
        message = f"AssertionError: feature {index + 1} is not implemented yet"
        result = TaskResult(task.id, task.title, Status.FAIL, task.description, message, task.hints)
        runs.append(TaskRun(task.id, result, 1, message, 0.0))
        first_failure = index
        break
    return SequenceRun(tuple(runs), first_failure, len(runs), len(manifest.tasks))


class _Student:
    def __init__(self, user: str, sim: "_Simulation"):
        self.user = user
        self.sim = sim
        self.cfg = sim.config
        self.forge = FakeForge(f"{user}/exercise")
        self.builds = 0
        self.session = 0.0
        self.solved: set[int] = set()
        self.handed_out: set[int] = set()
        self.trace: list[tuple[datetime, int]] = []
        self.truth: list[TaskTruth] = []
        self.open_episodes: dict[int, datetime] = {}
        self.t = EPOCH + timedelta(minutes=math.floor(sim.uniform() * MAX_START_OFFSET))

    # -- builds ---------------------------------------------------------

    def _next_build(self) -> tuple[str, str]:
        self.builds += 1
        build_id = f"{self.user}-{self.builds:04d}"
        digest = hashlib.sha1(f"{self.cfg.seed}:{build_id}".encode()).hexdigest()[:12]
        self.sim.commits.append((self.user, digest, self.t))
        return build_id, digest

    def red_build(self) -> None:
        """A push whose own test suite fails: commit and CI run, no event."""
        self._next_build()

    def green_build(self) -> int:
        build_id, commit = self._next_build()
        manifest = self.sim.manifest
        state = self.forge.list_open_issue_titles()
        if self.forge.has_issue(COMPLETION_TITLE):
            state.add(COMPLETION_TITLE)
        outcome = evaluate_build(
            _sequence_for(self.solved, manifest),
            manifest,
            frozenset(state),
            BuildMeta(self.user, build_id, commit, self.t),
        )
        for action in outcome.actions:
            ref = self.forge.apply_action(action)
            self.sim.transcript.append(
                TranscriptEntry(self.user, build_id, action.kind.value, action.title, ref.number)
            )
        self.sim.events.append(outcome.event)
        self.trace.append((self.t, outcome.score))
        return outcome.score

    # -- time -----------------------------------------------------------

    def work(self, minutes: int) -> None:
        """Advance through ``minutes`` of work, pushing red WIP builds and taking breaks."""
        remaining = minutes
        while remaining > 0:
            chunk = min(remaining, WIP_CHUNK_MIN + math.floor(self.sim.uniform() * WIP_CHUNK_SPAN))
            self.t += timedelta(minutes=chunk)
            self.session += chunk
            remaining -= chunk
            if remaining > 0:
                self.red_build()
                self.maybe_break(allow_short=True)

    def maybe_break(self, allow_short: bool) -> None:
        if self.session >= self.cfg.session_hours * 60:
            self.t += timedelta(minutes=OVERNIGHT_MIN + math.floor(self.sim.uniform() * OVERNIGHT_SPAN))
            self.session = 0.0
        elif allow_short and self.sim.uniform() < self.cfg.break_probability:
            self.t += timedelta(minutes=SHORT_BREAK_MIN + math.floor(self.sim.uniform() * SHORT_BREAK_SPAN))

    def duration(self, mean: float) -> int:
        u = self.sim.uniform()
        return max(1, round(-mean * math.log(1.0 - u)))

    # -- bookkeeping ----------------------------------------------------

    def hand_out(self, task: int) -> None:
        if task < self.cfg.task_count and task not in self.open_episodes:
            self.handed_out.add(task)
            self.open_episodes[task] = self.t

    def complete(self, task: int) -> None:
        task_id = self.sim.manifest.tasks[task].id
        if task in self.open_episodes:
            self.truth.append(TaskTruth(task_id, self.open_episodes.pop(task), self.t))
        else:
            self.truth.append(TaskTruth(task_id, None, self.t, anticipated=True))
        self.forge.close_titled(self.sim.manifest.tasks[task].title)

    def run(self) -> None:
        n = self.cfg.task_count
        score = self.green_build()  # the push fixing the seeded failing test
        self.hand_out(score)
        while score < n:
            current = score
            repairing = current in self.handed_out and any(
                k > current for k in self.solved
            )
            mean = self.cfg.mean_task_minutes * (REPAIR_FRACTION if repairing else 1.0)
            self.work(self.duration(mean))

            newly = [current]
            nxt = current + 1
            if (
                nxt < n
                and nxt not in self.solved
                and nxt not in self.handed_out
                and self.sim.uniform() < self.cfg.anticipation_probability
            ):
                newly.append(nxt)
            self.solved.update(newly)

            broken = None
            candidates = sorted(
                k for k in self.handed_out if k < current and k in self.solved and not repairing
            )
            if candidates and self.sim.uniform() < self.cfg.regression_probability:
                broken = candidates[math.floor(self.sim.uniform() * len(candidates))]
                self.solved.discard(broken)

            score = self.green_build()
            for task in newly:
                self.complete(task)
            if broken is not None:
                assert score == broken
            self.hand_out(score)
            self.maybe_break(allow_short=False)

        self.sim.traces[self.user] = self.trace
        self.sim.truths[self.user] = self.truth
        self.sim.forges[self.user] = self.forge


class _Simulation:
    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.manifest = simulation_manifest(config.task_count)
        self.events: list[ProgressEvent] = []
        self.commits: list[tuple[str, str, datetime]] = []
        self.transcript: list[TranscriptEntry] = []
        self.traces: dict[str, list[tuple[datetime, int]]] = {}
        self.truths: dict[str, list[TaskTruth]] = {}
        self.forges: dict[str, FakeForge] = {}

    def uniform(self) -> float:
        return self.rng.random()


def simulate(config: SimConfig) -> SimOutcome:
    config.validate()
    sim = _Simulation(config)
    width = max(2, len(str(config.student_count)))
    for i in range(config.student_count):
        _Student(f"student{i + 1:0{width}d}", sim).run()
    return SimOutcome(
        config=config,
        manifest=sim.manifest,
        events=sim.events,
        commits=sim.commits,
        traces=sim.traces,
        ground_truth=sim.truths,
        forge_transcript=sim.transcript,
        forges=sim.forges,
    )
