"""CSV, SVG and manifest writers.

Numbers are written as the shortest decimal that round-trips (``repr``),
so files are byte-stable across runs and platforms.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .engine import FdPoint, StepRecord, WorldState

FD_HEADER = ("n", "density_veh_per_km", "flow_veh_per_h", "mean_speed_m_per_s", "stationary")
TRAJECTORY_HEADER = ("step", "t_s", "id", "x_m", "y_m", "vx_mps", "vy_mps", "fx_mps2", "fy_mps2")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_fd_csv(path: Path, points: Sequence[FdPoint]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(FD_HEADER)
        for p in points:
            out.writerow([fmt(p.n), fmt(p.density), fmt(p.flow), fmt(p.mean_speed),
                          fmt(p.stationary)])


def read_fd_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"n": int(r["n"]), "density": float(r["density_veh_per_km"]),
             "flow": float(r["flow_veh_per_h"]), "mean_speed": float(r["mean_speed_m_per_s"]),
             "stationary": r["stationary"] == "true"} for r in rows]


class TrajectoryWriter:
    """Streams every ``every``-th post-step state with the accelerations that produced it."""

    def __init__(self, fh: TextIO, every: int):
        if every <= 0:
            raise ValueError("trajectory interval must be positive")
        self.every = every
        self._out = csv.writer(fh, lineterminator="\n")
        self._fh = fh
        self._out.writerow(TRAJECTORY_HEADER)

    def __call__(self, world: WorldState, rec: StepRecord) -> None:
        if world.step_index % self.every:
            return
        step, t = fmt(world.step_index), fmt(world.t)
        for k in np.argsort(world.ids, kind="stable"):
            self._out.writerow([step, t, fmt(world.ids[k]), fmt(world.x[k]), fmt(world.y[k]),
                                fmt(world.v_x[k]), fmt(world.v_y[k]), fmt(rec.f_x[k]),
                                fmt(rec.f_y[k])])
        self._fh.flush()


def read_trajectories(path: Path) -> dict[int, dict[str, np.ndarray]]:
    """Recorded states grouped by step, each column an array sorted by id.

    Raises :class:`ValueError` when the header or a value does not match
    the trajectory schema.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
        groups: dict[int, list[list[float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRAJECTORY_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(TRAJECTORY_HEADER)} fields")
            try:
                step, vid = int(row[0]), int(row[2])
                vals = [float(v) for v in row[1:2] + row[3:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            groups.setdefault(step, []).append([vid] + vals)
    out = {}
    for step, rows in sorted(groups.items()):
        arr = np.array(rows)
        arr = arr[np.argsort(arr[:, 0], kind="stable")]
        ids = arr[:, 0].astype(np.int64)
        if np.unique(ids).size != ids.size:
            raise ValueError(f"{path}: duplicate id at step {step}")
        out[step] = {"id": ids, "t": arr[:, 1], "x": arr[:, 2], "y": arr[:, 3],
                     "v_x": arr[:, 4], "v_y": arr[:, 5], "f_x": arr[:, 6], "f_y": arr[:, 7]}
    return out


def _nice_ceiling(value: float) -> float:
    if value <= 0:
        return 1.0
    base = 10.0 ** math.floor(math.log10(value))
    for m in (1, 2, 2.5, 5, 10):
        if m * base >= value:
            return m * base
    return 10 * base


def fd_svg(series: dict[str, Sequence[FdPoint]], width: int = 720, height: int = 480) -> str:
    """Flow-density overlay of several scenarios as a standalone SVG document."""
    left, right, top, bottom = 70, 170, 20, 50
    pw, ph = width - left - right, height - top - bottom
    all_pts = [p for pts in series.values() for p in pts]
    x_max = _nice_ceiling(max((p.density for p in all_pts), default=1.0))
    y_max = _nice_ceiling(max((p.flow for p in all_pts), default=1.0))

    def sx(v):
        return f"{left + pw * v / x_max:.2f}"

    def sy(v):
        return f"{top + ph * (1.0 - v / y_max):.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for k in range(6):
        xv, yv = x_max * k / 5, y_max * k / 5
        parts.append(f'<line x1="{sx(xv)}" y1="{top}" x2="{sx(xv)}" y2="{top + ph}" stroke="#eee"/>')
        parts.append(f'<line x1="{left}" y1="{sy(yv)}" x2="{left + pw}" y2="{sy(yv)}" stroke="#eee"/>')
        parts.append(f'<text x="{sx(xv)}" y="{top + ph + 16}" text-anchor="middle">{xv:g}</text>')
        parts.append(f'<text x="{left - 6}" y="{sy(yv)}" text-anchor="end" '
                     f'dominant-baseline="middle">{yv:g}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 12}" text-anchor="middle">'
                 'density (veh/km)</text>')
    parts.append(f'<text transform="translate(16,{top + ph / 2}) rotate(-90)" '
                 'text-anchor="middle">flow (veh/h)</text>')

    for idx, (name, pts) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        ordered = sorted(pts, key=lambda p: p.density)
        coords = " ".join(f"{sx(p.density)},{sy(p.flow)}" for p in ordered)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for p in ordered:
            fill = color if p.stationary else "white"
            parts.append(f'<circle cx="{sx(p.density)}" cy="{sy(p.flow)}" r="3" '
                         f'fill="{fill}" stroke="{color}"/>')
        ly = top + 16 + 20 * idx
        parts.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 42}" y="{ly}" dominant-baseline="middle">'
                     f'{_escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_manifest(path: Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def point_summary(scenario: str, p: FdPoint) -> dict:
    return {"scenario": scenario, "n": p.n, "flow_veh_per_h": p.flow,
            "stationary": p.stationary, "collisions": p.collisions, "error": p.error}


def audit_summary(rows: Iterable[dict]) -> dict:
    rows = list(rows)
    return {
        "clean": all(r["collisions"] == 0 and r["error"] is None for r in rows),
        "all_stationary": all(r["stationary"] for r in rows),
        "points": rows,
    }
