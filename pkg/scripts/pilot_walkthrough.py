"""Replay one student's journey through the 25-task pilot exercise.

Builds the hidden repository and a workspace in a temp dir, then pushes
builds the way a student would: first with the seeded failing heading test,
then solving one feature per push. Each build runs ``profci evaluate``
against a file-backed fake forge and the resulting tickets are summarised.

    python3 scripts/pilot_walkthrough.py [--keep DIR]
"""

import argparse
import contextlib
import io
import json
import tempfile
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path

from profci import pilot
from profci.cli import main

START = datetime(2016, 10, 24, 9, 0, tzinfo=timezone.utc)


def walk(root: Path) -> None:
    manifest = pilot.build_hidden_repo(root / "hidden")
    ws = root / "workspace"
    forge_file = root / "forge.json"
    env = {"PROFCI_TASKS_URL": f"file://{manifest}", "PATH": "/usr/bin:/bin"}

    def push(n, solved, heading_fixed=True):
        pilot.build_workspace(ws, solved, heading_fixed)
        argv = [
            "evaluate", "--workspace", str(ws), "--repository", "student/shop",
            "--forge-url", f"file://{forge_file}", "--user", "student",
            "--build-id", f"b{n:02d}", "--commit", f"c{n:02d}",
            "--now", (START + timedelta(minutes=25 * n)).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "--events-file", str(root / "events.jsonl"),
        ]
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(buf):
            code = main(argv, env=env)
        actions = [line for line in buf.getvalue().splitlines() if line.startswith(("create", "comment"))]
        score = next((line for line in buf.getvalue().splitlines() if line.startswith("score")), "-")
        print(f"build {n:2d}  solved={solved:2d}  exit={code}  {score:<32} {'; '.join(actions)}")

    started = time.perf_counter()
    push(0, 0, heading_fixed=False)
    for n, solved in enumerate(range(26), start=1):
        push(n, solved)
    state = json.loads(forge_file.read_text())
    print(f"\n{len(state['issues'])} issues opened in {time.perf_counter() - started:.1f} s")
    print("last issue body:\n" + state["issues"][-1]["body"])


def cli() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--keep", help="write everything to this directory instead of a temp dir")
    args = parser.parse_args()
    if args.keep:
        Path(args.keep).mkdir(parents=True, exist_ok=True)
        walk(Path(args.keep))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            walk(Path(tmp))


if __name__ == "__main__":
    cli()
