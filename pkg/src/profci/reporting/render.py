"""Deterministic CSV, JSON and static SVG renderings of the analytics."""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime
from typing import Sequence
from xml.sax.saxutils import escape

from ..evaluator import format_timestamp
from .analytics import PunchCard, SeriesSet, StuckUser, TimeMatrix

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class UnsupportedCombination(ValueError):
    pass


def fmt_minutes(value: float | None) -> str:
    if value is None:
        return ""
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _num(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _csv(rows: Sequence[Sequence[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=",", lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _json_number(value: float | None):
    if value is None:
        return None
    return int(value) if float(value).is_integer() else round(value, 2)


# -- time matrix ------------------------------------------------------------


def _matrix_csv(m: TimeMatrix) -> bytes:
    rows = [["user", *m.tasks]]
    rows += [[u, *(fmt_minutes(v) for v in m.row(u))] for u in m.users]
    return _csv(rows)


def _matrix_json(m: TimeMatrix) -> bytes:
    return _json({
        "tasks": list(m.tasks),
        "rows": [{"user": u, "minutes": [_json_number(v) for v in m.row(u)]} for u in m.users],
    })


def _heat(value: float, peak: float) -> str:
    # white -> dark orange
    t = 0.0 if peak <= 0 else min(1.0, value / peak)
    r = 255 - int(round(t * (255 - 217)))
    g = 255 - int(round(t * (255 - 95)))
    b = 255 - int(round(t * (255 - 2)))
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg(width: float, height: float, body: list[str]) -> bytes:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}" font-family="sans-serif" font-size="10">\n'
    )
    return (head + "\n".join(body) + "\n</svg>\n").encode("utf-8")


def _heat_grid(
    row_labels: Sequence[str],
    col_labels: Sequence[str],
    values: Sequence[Sequence[float | None]],
    title: str,
) -> bytes:
    cell, left, top = 22, 90, 40
    width = left + cell * len(col_labels) + 10
    height = top + cell * len(row_labels) + 10
    peak = max((v for row in values for v in row if v is not None), default=0)
    body = [f'<text x="{left}" y="14">{escape(title)}</text>']
    for j, label in enumerate(col_labels):
        x = left + j * cell + cell / 2
        body.append(f'<text x="{_num(x)}" y="{top - 6}" text-anchor="middle">{escape(label)}</text>')
    for i, label in enumerate(row_labels):
        y = top + i * cell
        body.append(f'<text x="{left - 4}" y="{_num(y + cell * 0.65)}" text-anchor="end">{escape(label)}</text>')
        for j, value in enumerate(values[i]):
            x = left + j * cell
            if value is None:
                fill, tip = "none", "blank"
            else:
                fill, tip = _heat(value, peak), fmt_minutes(value)
            body.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#cccccc">'
                f"<title>{escape(label)} / {escape(col_labels[j])}: {escape(tip)}</title></rect>"
            )
    return _svg(width, height, body)


def _matrix_svg(m: TimeMatrix) -> bytes:
    values = [m.row(u) for u in m.users]
    return _heat_grid(m.users, m.tasks, values, "Active minutes per task")


# -- progress series --------------------------------------------------------


def _series_csv(s: SeriesSet) -> bytes:
    rows = [["user", "timestamp", "score"]]
    for user, points in s.series.items():
        rows += [[user, format_timestamp(ts), str(score)] for ts, score in points]
    return _csv(rows)


def _series_json(s: SeriesSet) -> bytes:
    return _json({
        user: [{"timestamp": format_timestamp(ts), "score": score} for ts, score in points]
        for user, points in s.series.items()
    })


def _series_svg(s: SeriesSet) -> bytes:
    width, height, left, right, top, bottom = 800, 400, 50, 140, 20, 40
    stamps = [ts for points in s.series.values() for ts, _ in points]
    scores = [score for points in s.series.values() for _, score in points]
    t0 = min(stamps) if stamps else datetime.min
    t1 = max(stamps) if stamps else datetime.min
    span = max((t1 - t0).total_seconds(), 1.0)
    top_score = max(max(scores, default=0), 1)
    plot_w = width - left - right
    plot_h = height - top - bottom

    def x_of(ts: datetime) -> float:
        return left + plot_w * (ts - t0).total_seconds() / span

    def y_of(score: int) -> float:
        return top + plot_h * (1 - score / top_score)

    body = [
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<text x="{left - 6}" y="{top + 4}" text-anchor="end">{top_score}</text>',
        f'<text x="{left - 6}" y="{top + plot_h}" text-anchor="end">0</text>',
    ]
    if stamps:
        body.append(f'<text x="{left}" y="{height - 10}">{escape(format_timestamp(t0))}</text>')
        body.append(
            f'<text x="{left + plot_w}" y="{height - 10}" text-anchor="end">{escape(format_timestamp(t1))}</text>'
        )
    for k, (user, points) in enumerate(s.series.items()):
        colour = PALETTE[k % len(PALETTE)]
        coords: list[tuple[float, float]] = []
        for ts, score in points:
            x, y = x_of(ts), y_of(score)
            if coords:
                coords.append((x, coords[-1][1]))  # hold previous score until this build
            coords.append((x, y))
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in coords)
        body.append(
            f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5">'
            f"<title>{escape(user)}</title></polyline>"
        )
        ly = top + 12 * k + 8
        body.append(f'<text x="{width - right + 10}" y="{ly}" fill="{colour}">{escape(user)}</text>')
    return _svg(width, height, body)


# -- punch card -------------------------------------------------------------


def _punch_csv(p: PunchCard) -> bytes:
    rows = [["weekday", *(str(h) for h in range(24))]]
    rows += [[WEEKDAYS[d], *(str(c) for c in p.counts[d])] for d in range(7)]
    return _csv(rows)


def _punch_json(p: PunchCard) -> bytes:
    return _json({
        "timezone": p.timezone,
        "counts": {WEEKDAYS[d]: list(p.counts[d]) for d in range(7)},
    })


def _punch_svg(p: PunchCard) -> bytes:
    values = [[float(c) if c else None for c in row] for row in p.counts]
    return _heat_grid(WEEKDAYS, [str(h) for h in range(24)], values, f"Commits by hour ({p.timezone})")


# -- stuck users ------------------------------------------------------------


def _stuck_csv(rows: Sequence[StuckUser]) -> bytes:
    out = [["user", "task", "stalled_minutes", "solvers"]]
    out += [[r.user, r.task_id, fmt_minutes(r.stalled_minutes), str(r.solver_count)] for r in rows]
    return _csv(out)


def _stuck_json(rows: Sequence[StuckUser]) -> bytes:
    return _json([
        {
            "user": r.user,
            "task": r.task_id,
            "stalled_minutes": _json_number(r.stalled_minutes),
            "solvers": r.solver_count,
        }
        for r in rows
    ])


_RENDERERS = {
    (TimeMatrix, "csv"): _matrix_csv,
    (TimeMatrix, "json"): _matrix_json,
    (TimeMatrix, "svg"): _matrix_svg,
    (SeriesSet, "csv"): _series_csv,
    (SeriesSet, "json"): _series_json,
    (SeriesSet, "svg"): _series_svg,
    (PunchCard, "csv"): _punch_csv,
    (PunchCard, "json"): _punch_json,
    (PunchCard, "svg"): _punch_svg,
}


def render_report(obj, fmt: str) -> bytes:
    """Render a matrix, series set, punch card or stuck-user list."""
    if isinstance(obj, (list, tuple)) and all(isinstance(r, StuckUser) for r in obj):
        if fmt == "csv":
            return _stuck_csv(obj)
        if fmt == "json":
            return _stuck_json(obj)
        raise UnsupportedCombination(f"stuck-user lists cannot be rendered as {fmt}")
    renderer = _RENDERERS.get((type(obj), fmt))
    if renderer is None:
        raise UnsupportedCombination(f"cannot render {type(obj).__name__} as {fmt!r}")
    return renderer(obj)
