"""Run artifacts: trajectory CSV, audit JSON and SVG figures.

Every file is written to a temporary sibling first and moved into place, so
readers never see a partial artifact.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .controller import HybridState
from .geometry import Sphere
from .simulator import HybridTrajectory, Sample
from .world import World, nearest_obstacle

COLUMNS = ("t", "j", "m", "x", "y", "z", "hx", "hy", "hz", "ax", "ay", "az", "s", "gap", "ux", "uy", "uz")


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _row(s: Sample) -> list[str]:
    st = s.state
    vals = [s.t, s.j, st.m, *st.x, *st.h, *st.a, st.s, s.gap, *s.u]
    return [repr(int(v)) if k in (1, 2) else repr(float(v)) for k, v in enumerate(vals)]


def trajectory_csv(traj: HybridTrajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for s in traj.samples:
        w.writerow(_row(s))
    return buf.getvalue()


def write_csv(traj: HybridTrajectory, path) -> None:
    atomic_write(path, trajectory_csv(traj))


def read_csv(path) -> list[Sample]:
    """Samples from a trajectory CSV; ``s0`` is taken from the first row."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    missing = set(COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    s0 = float(rows[0]["s"])
    out = []
    for r in rows:
        state = HybridState(
            x=[float(r["x"]), float(r["y"]), float(r["z"])],
            h=[float(r["hx"]), float(r["hy"]), float(r["hz"])],
            a=[float(r["ax"]), float(r["ay"]), float(r["az"])],
            m=int(r["m"]),
            s=float(r["s"]),
            s0=s0,
        )
        u = np.array([float(r["ux"]), float(r["uy"]), float(r["uz"])])
        out.append(Sample(float(r["t"]), int(r["j"]), state, u, float(r["gap"]), None))
    return out


def recomputed_gaps(samples: list[Sample], world: World) -> np.ndarray:
    return np.array([nearest_obstacle(world, s.state.x).distance - world.r_a for s in samples])


def write_json(obj, path) -> None:
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# Figures (plain SVG, no plotting library)
# ---------------------------------------------------------------------------

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")
MODE_COLORS = {0: "#d62728", 1: "#1f4fd6"}


def _thin(samples: list[Sample], limit: int = 4000) -> list[Sample]:
    """Every k-th sample plus all samples adjacent to a jump."""
    if len(samples) <= limit:
        return samples
    k = math.ceil(len(samples) / limit)
    n = len(samples)
    keep = [i for i in range(n)
            if i % k == 0 or i == n - 1
            or (i + 1 < n and samples[i + 1].j != samples[i].j)
            or (i > 0 and samples[i - 1].j != samples[i].j)]
    return [samples[i] for i in keep]


def _f(v: float) -> str:
    return f"{v:.2f}"


def _polyline(pts, color: str, width: float = 1.2, dash: str | None = None) -> str:
    d = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def _text(x, y, s, size=11, anchor="middle", rotate=None) -> str:
    tr = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
    s = s.replace("&", "&amp;").replace("<", "&lt;")
    return f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}"{tr}>{s}</text>'


def _document(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>", ""])


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def distance_plot(runs: dict[str, list[Sample]], world: World, gamma: float, path) -> None:
    """Distance from the robot center to the obstacle union against time."""
    W, H, L, R, T, B = 720, 400, 60, 130, 20, 45
    t_hi = max((s.t for smp in runs.values() for s in smp), default=1.0) or 1.0
    finite = [s.gap + world.r_a for smp in runs.values() for s in smp if math.isfinite(s.gap)]
    d_hi = min(max(finite, default=1.0), 6 * (world.r_a + gamma)) * 1.05

    def px(t, d):
        return L + (W - L - R) * t / t_hi, H - B - (H - T - B) * min(d, d_hi) / d_hi

    body = [f'<rect x="{L}" y="{T}" width="{W - L - R}" height="{H - T - B}" fill="none" stroke="black"/>']
    for tv in _ticks(0.0, t_hi):
        x, _ = px(tv, 0)
        body += [_polyline([(x, H - B), (x, H - B + 4)], "black", 1), _text(x, H - B + 16, f"{tv:g}")]
    for dv in _ticks(0.0, d_hi):
        _, y = px(0, dv)
        body += [_polyline([(L - 4, y), (L, y)], "black", 1), _text(L - 7, y + 4, f"{dv:g}", anchor="end")]
    body += [_text((L + W - R) / 2, H - 8, "time [s]"),
             _text(16, (T + H - B) / 2, "distance to obstacles [m]", rotate=-90)]
    for level, dash in ((world.r_a, "6,3"), (world.r_a + gamma, "2,3")):
        if level <= d_hi:
            y = px(0, level)[1]
            body += [_polyline([(L, y), (W - R, y)], "#555555", 1, dash)]
    for k, (label, samples) in enumerate(runs.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = [px(s.t, s.gap + world.r_a) for s in _thin(samples) if math.isfinite(s.gap)]
        if pts:
            body.append(_polyline(pts, color))
        y = T + 12 + 16 * k
        body += [_polyline([(W - R + 10, y - 4), (W - R + 30, y - 4)], color, 2), _text(W - R + 35, y, label, 10, "start")]
    y = T + 12 + 16 * len(runs)
    body += [_polyline([(W - R + 10, y - 4), (W - R + 30, y - 4)], "#555555", 1, "6,3"), _text(W - R + 35, y, "r_a", 10, "start"),
             _polyline([(W - R + 10, y + 12), (W - R + 30, y + 12)], "#555555", 1, "2,3"),
             _text(W - R + 35, y + 16, "r_a + gamma", 10, "start")]
    atomic_write(path, _document(W, H, body))


def view_basis(azimuth: float = 35.0, elevation: float = 25.0) -> np.ndarray:
    """Rows: screen-right, screen-up and toward-viewer unit vectors."""
    az, el = math.radians(azimuth), math.radians(elevation)
    toward = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    right = np.array([-math.sin(az), math.cos(az), 0.0])
    return np.stack([right, np.cross(toward, right), toward])


def silhouette(shape, basis: np.ndarray) -> tuple[str, tuple]:
    """Orthographic outline: ``("circle", (cx, cy, r))`` or ``("polygon", points)``."""
    from scipy.spatial import ConvexHull

    if isinstance(shape, Sphere):
        c = basis[:2] @ shape.center
        return "circle", (float(c[0]), float(c[1]), shape.radius)
    q = shape.vertices @ basis[:2].T
    hull = ConvexHull(q)
    return "polygon", tuple(map(tuple, q[hull.vertices]))


def trajectory_plot(runs: dict[str, list[Sample]], world: World, path, azimuth: float = 35.0,
                    elevation: float = 25.0) -> None:
    """Orthographic projection; red while moving to the target, blue while avoiding."""
    basis = view_basis(azimuth, elevation)
    W = H = 560
    M = 30
    outlines = [silhouette(s, basis) for s in world.obstacles]
    pts2 = [np.zeros(2)]
    for kind, geom in outlines:
        if kind == "circle":
            cx, cy, r = geom
            pts2 += [np.array([cx - r, cy - r]), np.array([cx + r, cy + r])]
        else:
            pts2 += [np.array(p) for p in geom]
    thinned = {k: _thin(v) for k, v in runs.items()}
    for smp in thinned.values():
        pts2 += [basis[:2] @ s.state.x for s in smp]
    P = np.array(pts2)
    lo, hi = P.min(axis=0), P.max(axis=0)
    scale = (W - 2 * M) / max(float(np.max(hi - lo)), 1e-9)
    mid = 0.5 * (lo + hi)

    def px(q):
        return W / 2 + scale * (q[0] - mid[0]), H / 2 - scale * (q[1] - mid[1])

    body = []
    for kind, geom in outlines:
        if kind == "circle":
            cx, cy = px(geom[:2])
            body.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(scale * geom[2])}" '
                        'fill="#bbbbbb" fill-opacity="0.5" stroke="#666666"/>')
        else:
            d = " ".join(f"{_f(x)},{_f(y)}" for x, y in map(px, geom))
            body.append(f'<polygon points="{d}" fill="#bbbbbb" fill-opacity="0.5" stroke="#666666"/>')
    for smp in thinned.values():
        run_pts = [smp[0]]
        for a, b in zip(smp, smp[1:]):
            if b.j != a.j or b.state.m != a.state.m:
                if len(run_pts) > 1:
                    body.append(_polyline([px(basis[:2] @ s.state.x) for s in run_pts], MODE_COLORS[run_pts[0].state.m], 1.5))
                run_pts = [b]
            else:
                run_pts.append(b)
        if len(run_pts) > 1:
            body.append(_polyline([px(basis[:2] @ s.state.x) for s in run_pts], MODE_COLORS[run_pts[0].state.m], 1.5))
        x0, y0 = px(basis[:2] @ smp[0].state.x)
        body.append(f'<circle cx="{_f(x0)}" cy="{_f(y0)}" r="3" fill="black"/>')
    ox, oy = px(np.zeros(2))
    body.append(f'<circle cx="{_f(ox)}" cy="{_f(oy)}" r="4" fill="#2ca02c"/>')
    body += [_text(M, H - 10, f"orthographic view, azimuth {azimuth:g} deg, elevation {elevation:g} deg", 10, "start"),
             _polyline([(W - 170, 18), (W - 150, 18)], MODE_COLORS[0], 2), _text(W - 145, 22, "move to target", 10, "start"),
             _polyline([(W - 170, 34), (W - 150, 34)], MODE_COLORS[1], 2), _text(W - 145, 38, "obstacle avoidance", 10, "start")]
    atomic_write(path, _document(W, H, body))
