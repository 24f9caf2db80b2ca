"""``profci`` command line: evaluate a CI build, render reports, simulate classrooms."""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import unquote, urlsplit

import httpx

from . import __version__
from .evaluator import (
    ActionKind,
    BuildMeta,
    COMPLETION_TITLE,
    ForgeAction,
    census_student_tests,
    evaluate_build,
    parse_timestamp,
    test_growth_gate,
)
from .forge import AuthRejected, ForgeConfig, ForgeError, ForgeUnavailable, MissingTargetIssue, connect
from .model import ExerciseManifest, ManifestError, parse_manifest
from .reporting import (
    EventLog,
    IngestServer,
    flag_stuck_users,
    load_log,
    punch_card,
    read_commits,
    render_report,
    series_set,
    time_per_task,
)
from .reporting.events import ReportRejected, ReportUnavailable, StorageFailure, post_event
from .runner import SpawnFailure, TimeoutExceeded, expand_command, run_feature_sequence, run_student_suite
from .simulator import ConfigInvalid, SimConfig, simulate, write_outcome

log = logging.getLogger("profci")

EXIT_OK = 0
EXIT_STUDENT_SUITE_FAILED = 1
EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3

TASKS_URL_VAR = "PROFCI_TASKS_URL"
FORGE_TOKEN_VAR = "PROFCI_FORGE_TOKEN"
REPORT_TOKEN_VAR = "PROFCI_REPORT_TOKEN"
REPORT_URL_VAR = "PROFCI_REPORT_URL"
SECRET_VARS = (TASKS_URL_VAR, FORGE_TOKEN_VAR, REPORT_TOKEN_VAR)
REDACTED = "[redacted]"
DEFAULT_FORGE_URL = "https://api.github.com"


class ConfigError(Exception):
    pass


class Unreachable(Exception):
    pass


class Scrubber:
    """Replaces every known secret value in text with a placeholder."""

    def __init__(self, secrets: Sequence[str] = ()):
        self.secrets: list[str] = []
        for secret in secrets:
            self.add(secret)

    def add(self, secret: str | None) -> None:
        # very short values would redact ordinary words
        if secret and len(secret) >= 4 and secret not in self.secrets:
            self.secrets.append(secret)
            self.secrets.sort(key=len, reverse=True)

    def __call__(self, text: str) -> str:
        for secret in self.secrets:
            text = text.replace(secret, REDACTED)
        return text


class _ScrubbingStream:
    def __init__(self, stream, scrub: Scrubber):
        self._stream = stream
        self._scrub = scrub

    def write(self, text: str) -> int:
        return self._stream.write(self._scrub(text))

    def flush(self) -> None:
        self._stream.flush()

    def __getattr__(self, name):
        return getattr(self._stream, name)


# -- manifest fetching ------------------------------------------------------


def fetch_manifest(source: str, token: str = "") -> tuple[ExerciseManifest, Path | None]:
    """Load the hidden manifest from ``file://`` or ``http(s)://``.

    Returns the manifest and, for local sources, the hidden repository
    directory. Error messages never repeat the source location.
    """
    parts = urlsplit(source)
    if parts.scheme == "file":
        path = Path(unquote(parts.path))
        try:
            text = path.read_text(encoding="utf-8")
        except OSError:
            raise ConfigError(f"hidden manifest at ${TASKS_URL_VAR} cannot be read") from None
        hidden_dir = path.parent
    elif parts.scheme in ("http", "https"):
        headers = {"Authorization": f"token {token}"} if token else {}
        try:
            response = httpx.get(source, headers=headers, timeout=30.0, follow_redirects=True)
        except httpx.HTTPError as exc:
            raise Unreachable(f"hidden manifest unreachable ({type(exc).__name__})") from None
        if response.status_code >= 500:
            raise Unreachable(f"hidden manifest host returned HTTP {response.status_code}")
        if response.status_code != 200:
            raise ConfigError(f"hidden manifest request returned HTTP {response.status_code}")
        text = response.text
        hidden_dir = None
    else:
        raise ConfigError(f"${TASKS_URL_VAR} must be a file:// or https:// URL")
    try:
        return parse_manifest(text), hidden_dir
    except ManifestError as exc:
        raise ConfigError(f"hidden manifest is invalid: {exc}") from None


# -- evaluate ---------------------------------------------------------------


def _child_env(env: Mapping[str, str]) -> dict[str, str]:
    return {k: v for k, v in env.items() if k not in SECRET_VARS}


def _first(env: Mapping[str, str], *names: str) -> str | None:
    for name in names:
        if env.get(name):
            return env[name]
    return None


def _build_meta(args, env: Mapping[str, str], repository: str) -> BuildMeta:
    user = args.user or _first(env, "PROFCI_USER", "GITHUB_ACTOR", "GITLAB_USER_LOGIN") or repository.split("/")[0]
    commit = args.commit or _first(env, "GITHUB_SHA", "CI_COMMIT_SHA", "TRAVIS_COMMIT") or "unknown"
    now = parse_timestamp(args.now) if args.now else datetime.now(timezone.utc).replace(microsecond=0)
    build_id = args.build_id or _first(env, "GITHUB_RUN_ID", "CI_JOB_ID", "TRAVIS_BUILD_ID")
    if not build_id:
        build_id = f"{commit[:12]}-{int(now.timestamp())}"
    return BuildMeta(user=user, build_id=build_id, commit_id=commit, now=now)


def _gate(args, workspace: Path):
    if not args.gate:
        return None, None
    current = census_student_tests(workspace, args.test_glob, args.test_pattern)
    state_path = Path(args.gate_state) if args.gate_state else workspace / ".profci" / "census.json"
    try:
        previous = json.loads(state_path.read_text(encoding="utf-8"))["census"]
    except (OSError, ValueError, KeyError):
        return None, (state_path, current)
    return test_growth_gate(previous, current, enabled=True), (state_path, current)


def _save_census(path: Path, census: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"census": census}) + "\n", encoding="utf-8")


def cmd_evaluate(args, env: Mapping[str, str], forge=None, out=print) -> int:
    tasks_url = env.get(TASKS_URL_VAR)
    if not tasks_url:
        raise ConfigError(f"{TASKS_URL_VAR} is not set; it must point at the hidden task manifest")
    forge_token = env.get(FORGE_TOKEN_VAR, "")
    workspace = Path(args.workspace).resolve()
    if not workspace.is_dir():
        raise ConfigError(f"workspace {workspace} does not exist")

    manifest, hidden_dir = fetch_manifest(tasks_url, forge_token)
    hidden = Path(args.hidden_dir).resolve() if args.hidden_dir else hidden_dir or workspace
    subs = {"python": sys.executable, "hidden_dir": str(hidden), "workspace": str(workspace)}
    child_env = _child_env(env)

    student_cmd = shlex.split(args.student_command) if args.student_command else manifest.student_suite_command
    student_cmd = expand_command(student_cmd, subs)
    try:
        suite = run_student_suite(workspace, student_cmd, args.timeout, child_env)
    except SpawnFailure as exc:
        raise ConfigError(f"student test suite could not start: {exc}") from None
    except TimeoutExceeded as exc:
        out(exc.output)
        out(f"student test suite {exc}")
        return EXIT_STUDENT_SUITE_FAILED
    if not suite.ok:
        out(suite.captured_output.rstrip("\n"))
        out(f"student test suite failed (exit status {suite.exit_status})")
        return EXIT_STUDENT_SUITE_FAILED
    out(f"student test suite passed in {suite.duration:.1f} s")

    try:
        sequence = run_feature_sequence(workspace, manifest, args.timeout, child_env, subs)
    except SpawnFailure as exc:
        raise ConfigError(f"feature test could not start: {exc}") from None

    repository = args.repository or env.get("GITHUB_REPOSITORY")
    if forge is None:
        if not repository:
            raise ConfigError("forge repository unknown; pass --repository or set GITHUB_REPOSITORY")
        forge_url = args.forge_url or env.get("PROFCI_FORGE_URL") or DEFAULT_FORGE_URL
        try:
            forge = connect(ForgeConfig(forge_url, repository, forge_token), sleep=args._sleep)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        repository = repository or getattr(forge, "repository", "student/exercise")
    meta = _build_meta(args, env, repository)
    gate, gate_state = _gate(args, workspace)

    try:
        state = set(forge.list_open_issue_titles())
        if args.completion_title not in state and forge.has_issue(args.completion_title):
            state.add(args.completion_title)
        outcome = evaluate_build(sequence, manifest, frozenset(state), meta, gate, args.completion_title)
        scrub = Scrubber([tasks_url, forge_token, env.get(REPORT_TOKEN_VAR, ""), str(hidden_dir or "")])
        for action in outcome.actions:
            action = ForgeAction(action.kind, action.title, scrub(action.body))
            ref = forge.apply_action(action)
            out(f"{action.kind.value}: #{ref.number} {action.title}")
            if gate_state is not None and action.kind is ActionKind.CREATE_ISSUE:
                _save_census(*gate_state)
    except AuthRejected as exc:
        raise ConfigError(str(exc)) from None
    except (ForgeUnavailable, MissingTargetIssue) as exc:
        raise Unreachable(f"forge: {exc}") from None
    except ForgeError as exc:
        raise Unreachable(f"forge: {exc}") from None

    if outcome.gate is not None and outcome.gate.holds and not outcome.actions:
        out(outcome.gate.message)

    total = len(manifest.tasks)
    out(f"score {outcome.score}/{total}" + (" - exercise complete" if outcome.completed else ""))

    if args.events_file:
        try:
            EventLog(args.events_file).ingest(outcome.event)
        except StorageFailure as exc:
            raise Unreachable(str(exc)) from None
    report_url = env.get(REPORT_URL_VAR) or manifest.report_endpoint
    if report_url:
        try:
            ack = post_event(report_url, outcome.event, env.get(REPORT_TOKEN_VAR, ""), sleep=args._sleep)
        except ReportUnavailable as exc:
            raise Unreachable(str(exc)) from None
        except ReportRejected as exc:
            raise ConfigError(str(exc)) from None
        out(f"progress event {ack.value}")
    return EXIT_OK


# -- report -----------------------------------------------------------------


def _task_ids(args, events) -> list[str]:
    if getattr(args, "manifest", None):
        try:
            manifest = parse_manifest(Path(args.manifest).read_text(encoding="utf-8"))
        except (OSError, ManifestError) as exc:
            raise ConfigError(f"cannot load manifest: {exc}") from None
        return [t.id for t in manifest.tasks]
    count = args.tasks
    if count is None:
        count = max((e.score for e in events), default=0)
        log.warning("task count not given; inferred %d from the highest score", count)
    width = max(2, len(str(count)))
    return [f"t{k + 1:0{width}d}" for k in range(count)]


def _load_events(paths):
    try:
        return load_log(paths)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad events input: {exc}") from None


def _load_commits(path):
    try:
        return read_commits(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad commits input: {exc}") from None


def _builds(commits) -> dict[str, list[datetime]]:
    builds: dict[str, list[datetime]] = {}
    for user, _, ts in commits:
        builds.setdefault(user, []).append(ts)
    return builds


def cmd_report(args, out_bytes) -> int:
    kind = args.report
    if kind == "punchcard":
        commits = _load_commits(args.commits)
        stamps = [ts for user, _, ts in commits if args.user is None or user == args.user]
        try:
            data = punch_card(stamps, args.timezone)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown timezone {args.timezone!r}: {exc}") from None
    else:
        event_log = _load_events(args.events)
        events = event_log.events()
        if kind == "progress":
            if args.user:
                events = [e for e in events if e.user == args.user]
            data = series_set(events)
        else:
            task_ids = _task_ids(args, events)
            builds = _builds(_load_commits(args.commits)) if args.commits else None
            if kind == "time-matrix":
                data = time_per_task(events, task_ids, builds, strict=args.strict)
            else:
                now = parse_timestamp(args.now) if args.now else datetime.now(timezone.utc)
                data = flag_stuck_users(events, now, args.threshold, task_ids, builds)
    try:
        out_bytes(render_report(data, args.format))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return EXIT_OK


# -- simulate / serve -------------------------------------------------------


def cmd_simulate(args, out=print) -> int:
    config = SimConfig(
        student_count=args.students,
        task_count=args.tasks,
        seed=args.seed,
        mean_task_minutes=args.mean_task_minutes,
        regression_probability=args.regression,
        anticipation_probability=args.anticipation,
        break_probability=args.breaks,
        session_hours=args.session_hours,
    )
    try:
        outcome = simulate(config)
    except ConfigInvalid as exc:
        raise ConfigError(f"invalid simulation config: {exc}") from None
    for path in write_outcome(outcome, args.out):
        out(str(path))
    return EXIT_OK


def cmd_serve(args, env: Mapping[str, str], out=print) -> int:
    server = IngestServer(EventLog(args.events), env.get(REPORT_TOKEN_VAR, ""), (args.host, args.port))
    out(f"accepting events on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profci", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser(
        "evaluate",
        help="run inside a CI job: student suite, hidden feature tests, tickets, progress event",
        description=(
            f"Reads the hidden manifest location from ${TASKS_URL_VAR} (never from a flag), "
            f"the forge token from ${FORGE_TOKEN_VAR} and the report endpoint from ${REPORT_URL_VAR}."
        ),
    )
    ev.add_argument("--workspace", default=".", help="student repository checkout (default: .)")
    ev.add_argument("--repository", help="owner/name on the forge (default: $GITHUB_REPOSITORY)")
    ev.add_argument(
        "--forge-url",
        help=f"forge API base URL, or file:///path.json for a local fake (default: $PROFCI_FORGE_URL or {DEFAULT_FORGE_URL})",
    )
    ev.add_argument("--user", help="student identifier for the progress event (default: CI actor)")
    ev.add_argument("--build-id", help="CI build identifier (default: from CI environment)")
    ev.add_argument("--commit", help="commit id (default: from CI environment)")
    ev.add_argument("--now", help="RFC 3339 build timestamp (default: current time)")
    ev.add_argument("--timeout", type=float, default=300, help="seconds per test command (default: 300)")
    ev.add_argument("--student-command", help="override the manifest's student suite command")
    ev.add_argument("--hidden-dir", help="local hidden repository for {hidden_dir} in task commands")
    ev.add_argument("--events-file", help="also append the progress event to this JSON-lines file")
    ev.add_argument("--completion-title", default=COMPLETION_TITLE, help="title of the completion issue")
    ev.add_argument("--gate", action="store_true", help="hold new tickets until the student's test count grows")
    ev.add_argument("--test-glob", default="test_*.py", help="files counted by the test-growth gate")
    ev.add_argument("--test-pattern", default=r"^\s*def test_", help="lines counted by the test-growth gate")
    ev.add_argument("--gate-state", help="census state file (default: <workspace>/.profci/census.json)")

    rp = sub.add_parser("report", help="render educator reports")
    rsub = rp.add_subparsers(dest="report", required=True)

    def common(p, formats=("csv", "json", "svg")):
        p.add_argument("--format", choices=formats, default="csv", help="output format (default: csv)")
        p.add_argument("--out", help="write to this file instead of stdout")

    def events_arg(p):
        p.add_argument("--events", action="append", required=True, help="JSON-lines event file (repeatable)")

    def tasks_arg(p):
        p.add_argument("--tasks", type=int, help="number of tasks (ids t01, t02, ...)")
        p.add_argument("--manifest", help="manifest file supplying task ids")

    tm = rsub.add_parser("time-matrix", help="active minutes per user and task")
    events_arg(tm)
    tasks_arg(tm)
    tm.add_argument("--commits", help="user,commit_id,timestamp CSV of all builds")
    tm.add_argument("--strict", action="store_true", help="reject logs with completions before any hand-out")
    common(tm)

    pg = rsub.add_parser("progress", help="score over time per user")
    events_arg(pg)
    pg.add_argument("--user", help="only this user")
    common(pg)

    pc = rsub.add_parser("punchcard", help="commits by weekday and hour")
    pc.add_argument("--commits", required=True, help="user,commit_id,timestamp CSV")
    pc.add_argument("--timezone", default="UTC", help="IANA timezone for binning (default: UTC)")
    pc.add_argument("--user", help="only this user")
    common(pc)

    st = rsub.add_parser("stuck", help="users whose score has stalled")
    events_arg(st)
    tasks_arg(st)
    st.add_argument("--commits", help="user,commit_id,timestamp CSV of all builds")
    st.add_argument("--now", help="RFC 3339 reference time (default: current time)")
    st.add_argument("--threshold", type=float, default=120, help="stall threshold in active minutes (default: 120)")
    common(st, ("csv", "json"))

    sm = sub.add_parser("simulate", help="generate a synthetic classroom")
    sm.add_argument("--students", type=int, default=30, help="number of students (default: 30)")
    sm.add_argument("--tasks", type=int, default=25, help="number of tasks (default: 25)")
    sm.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    sm.add_argument("--mean-task-minutes", type=float, default=40.0, help="mean minutes per task (default: 40)")
    sm.add_argument("--regression", type=float, default=0.05, help="probability a solving build breaks an earlier task")
    sm.add_argument("--anticipation", type=float, default=0.1, help="probability a solving build also solves the next task")
    sm.add_argument("--breaks", type=float, default=0.1, help="probability of a break between work chunks")
    sm.add_argument("--session-hours", type=float, default=3.0, help="work hours before an overnight break")
    sm.add_argument("--out", default="sim-out", help="output directory (default: sim-out)")

    sv = sub.add_parser("serve", help="run the POST /events ingestion endpoint")
    sv.add_argument("--events", required=True, help="JSON-lines file events are appended to")
    sv.add_argument("--host", default="127.0.0.1", help="bind address (default: 127.0.0.1)")
    sv.add_argument("--port", type=int, default=8080, help="port (default: 8080)")
    return parser


def main(argv: Sequence[str] | None = None, env: Mapping[str, str] | None = None, forge=None, sleep=None) -> int:
    env = dict(os.environ if env is None else env)
    scrub = Scrubber([env.get(name, "") for name in SECRET_VARS])
    tasks_url = env.get(TASKS_URL_VAR, "")
    if tasks_url.startswith("file://"):
        scrub.add(unquote(urlsplit(tasks_url).path))
        scrub.add(str(Path(unquote(urlsplit(tasks_url).path)).parent))

    real_out, real_err = sys.stdout, sys.stderr
    sys.stdout = _ScrubbingStream(real_out, scrub)
    sys.stderr = _ScrubbingStream(real_err, scrub)
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
            force=True,
        )
        args._sleep = sleep or time.sleep

        def out(text: str) -> None:
            print(text, file=sys.stdout)

        try:
            if args.command == "evaluate":
                return cmd_evaluate(args, env, forge, out)
            if args.command == "report":
                return cmd_report(args, _byte_sink(args.out))
            if args.command == "simulate":
                return cmd_simulate(args, out)
            if args.command == "serve":
                return cmd_serve(args, env, out)
        except ConfigError as exc:
            print(f"profci: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except Unreachable as exc:
            print(f"profci: unreachable: {exc}", file=sys.stderr)
            return EXIT_UNREACHABLE
        parser.error(f"unknown command {args.command}")
        return EXIT_CONFIG
    finally:
        sys.stdout.flush()
        sys.stderr.flush()
        sys.stdout, sys.stderr = real_out, real_err


def _byte_sink(path: str | None):
    def write(data: bytes) -> None:
        if path:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_bytes(data)
        else:
            sys.stdout.write(data.decode("utf-8"))

    return write


def entry() -> None:
    sys.exit(main())
