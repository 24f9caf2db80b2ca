"""Simulate a classroom and render every report into one directory.

    python3 scripts/simulate_classroom.py --out classroom --students 30 --tasks 25 --seed 42

Prints a short summary: matrix shape, blank (anticipated) cells, score
drops, stalled students at the end of day one.
"""

import argparse
import time
from datetime import timedelta
from pathlib import Path

from profci.reporting import flag_stuck_users, punch_card, render_report, series_set, time_per_task
from profci.simulator import EPOCH, SimConfig, simulate, write_outcome


def run(args) -> None:
    started = time.perf_counter()
    cfg = SimConfig(
        student_count=args.students,
        task_count=args.tasks,
        seed=args.seed,
        regression_probability=args.regression,
        anticipation_probability=args.anticipation,
    )
    outcome = simulate(cfg)
    out = Path(args.out)
    write_outcome(outcome, out)
    builds = outcome.builds_per_user()

    matrix = time_per_task(outcome.events, outcome.task_ids, builds, strict=True)
    series = series_set(outcome.events)
    card = punch_card((ts for _, _, ts in outcome.commits), args.timezone)
    evening = EPOCH + timedelta(hours=9)
    stuck = flag_stuck_users(outcome.events, evening, 60, outcome.task_ids, builds)

    for name, obj, formats in (
        ("time_matrix", matrix, ("csv", "json", "svg")),
        ("progress", series, ("csv", "json", "svg")),
        ("punchcard", card, ("csv", "json", "svg")),
        ("stuck", stuck, ("csv", "json")),
    ):
        for fmt in formats:
            (out / f"{name}.{fmt}").write_bytes(render_report(obj, fmt))

    blanks = sum(v is None for v in matrix.cells.values())
    drops = sum(
        1 for points in series.series.values() for (_, a), (_, b) in zip(points, points[1:]) if b < a
    )
    print(f"{len(matrix.users)} x {len(matrix.tasks)} matrix, {blanks} blank cells, {drops} score drops")
    print(f"{len(outcome.commits)} commits, {len(outcome.events)} progress events, "
          f"{len(outcome.forge_transcript)} forge actions")
    print(f"{len(stuck)} students stalled >= 60 active min at {evening:%Y-%m-%d %H:%M} UTC")
    print(f"wrote {out}/ in {time.perf_counter() - started:.2f} s")


def cli() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="classroom")
    parser.add_argument("--students", type=int, default=30)
    parser.add_argument("--tasks", type=int, default=25)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--regression", type=float, default=0.1)
    parser.add_argument("--anticipation", type=float, default=0.1)
    parser.add_argument("--timezone", default="Europe/Berlin")
    run(parser.parse_args())


if __name__ == "__main__":
    cli()
