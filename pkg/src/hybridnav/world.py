"""Workspace model: obstacles, robot radii, feasibility checks and
nearest-obstacle queries over the obstacle union.

Obstacle indices follow the convention ``0 = workspace boundary`` (only
present for a bounded box workspace) and ``1..b`` for the listed obstacles.
"""
from __future__ import annotations

import itertools
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConvexShape, HalfspaceBox, Segment, pair_distance, segment_distance


@dataclass(frozen=True)
class NearestHit:
    obstacle_index: int | None
    distance: float
    projection: np.ndarray
    x_pi: np.ndarray


@dataclass
class FeasibilityReport:
    min_pair_separation: float
    d0: float
    r_bar_s: float
    ok: bool
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "min_pair_separation": self.min_pair_separation,
            "d0": self.d0,
            "r_bar_s": self.r_bar_s,
            "ok": self.ok,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class World:
    obstacles: tuple[ConvexShape, ...]
    robot_radius: float
    safety_margin: float
    workspace: HalfspaceBox | None = None
    _cache: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.robot_radius < 0:
            raise ValueError("robot radius must be >= 0")

    @property
    def r_a(self) -> float:
        return self.robot_radius + self.safety_margin

    @property
    def bounded(self) -> bool:
        return self.workspace is not None

    def shape(self, index: int) -> ConvexShape:
        if index == 0:
            raise ValueError("index 0 is the workspace complement, not a convex shape")
        return self.obstacles[index - 1]

    def probe(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-obstacle distances and closest points for ``x``.

        Row ``i`` corresponds to obstacle index ``i``; row 0 is ``inf``/``nan``
        for an unbounded workspace.
        """
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        n = len(self.obstacles) + 1
        dists = np.empty(n)
        projs = np.empty((n, 3))
        if self.workspace is not None:
            dists[0], projs[0] = _boundary_projection(x, self.workspace)
        else:
            dists[0] = math.inf
            projs[0] = math.nan
        for i, s in enumerate(self.obstacles, start=1):
            p = s.closest_point(x)
            projs[i] = p
            r = x - p
            dists[i] = math.sqrt(r @ r)
        dists.setflags(write=False)
        projs.setflags(write=False)
        self._cache[key] = (dists, projs)
        if len(self._cache) > 32:
            self._cache.popitem(last=False)
        return dists, projs

    def segment_distance(self, seg: Segment, index: int) -> float:
        if index == 0:
            return min(_boundary_projection(seg.p, self.workspace)[0],
                       _boundary_projection(seg.q, self.workspace)[0])
        return segment_distance(seg, self.obstacles[index - 1])


def _boundary_projection(x: np.ndarray, box: HalfspaceBox) -> tuple[float, np.ndarray]:
    """Distance and closest point from ``x`` to the complement of the box interior."""
    if not box.contains(x[None], tol=0.0)[0]:
        return 0.0, x.copy()
    gaps = np.concatenate([x - box.lo, box.hi - x])
    k = int(np.argmin(gaps))
    p = x.copy()
    p[k % 3] = box.lo[k % 3] if k < 3 else box.hi[k % 3]
    return float(gaps[k]), p


def nearest_obstacle(world: World, x) -> NearestHit:
    """Closest obstacle to ``x``; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    dists, projs = world.probe(x)
    i = 0
    d = math.inf
    for k, dk in enumerate(dists.tolist()):
        if dk < d:  # strict: ties keep the lower index
            i, d = k, dk
    if d == math.inf:
        return NearestHit(None, math.inf, np.full(3, np.nan), np.full(3, np.nan))
    return NearestHit(i, d, projs[i], x - projs[i])


def free_space_contains(world: World, y: float, x) -> bool:
    """Whether ``x`` lies in the ``y``-eroded obstacle-free workspace."""
    if y < 0:
        raise ValueError("erosion radius must be >= 0")
    dists, _ = world.probe(np.asarray(x, dtype=float))
    if world.workspace is not None and not world.workspace.contains(np.asarray(x)[None], tol=0.0)[0]:
        return False
    return bool(np.all(dists >= y))


def _workspace_separation(box: HalfspaceBox, shape: ConvexShape) -> float:
    lo, hi = shape.aabb()
    return max(min(float(np.min(lo - box.lo)), float(np.min(box.hi - hi))), 0.0)


def validate(world: World, gamma: float, gamma_a: float, gamma_s: float, epsilon: float) -> FeasibilityReport:
    """Check the separation assumption and the parameter ranges.

    Every failed condition is listed in ``violations``; nothing is raised.
    """
    r, r_s = world.robot_radius, world.safety_margin
    seps = [pair_distance(a, b) for a, b in itertools.combinations(world.obstacles, 2)]
    if world.workspace is not None:
        seps += [_workspace_separation(world.workspace, s) for s in world.obstacles]
    r_bar = min(seps, default=math.inf)
    d_origin = nearest_obstacle(world, np.zeros(3)).distance
    d0 = d_origin - r
    r_bar_s = min(r_bar / 2.0 - r, d0)

    violations = []
    warnings = []
    if r < 0:
        violations.append(f"robot radius r={r} must be >= 0")
    if not r_bar > 2 * r:
        violations.append(f"Assumption 1: minimum obstacle separation {r_bar:.6g} must exceed 2r={2 * r:.6g}")
    if not d0 > 0:
        violations.append(f"target clearance d(0, O_W) - r = {d0:.6g} must be positive")
    if not 0 < r_s < r_bar_s:
        violations.append(f"safety margin r_s={r_s} must lie in (0, r_bar_s={r_bar_s:.6g})")
    if not 0 < gamma_a < gamma_s < gamma:
        violations.append(f"need 0 < gamma_a={gamma_a} < gamma_s={gamma_s} < gamma={gamma}")
    if not gamma < r_bar_s - r_s:
        violations.append(f"gamma={gamma} must be below r_bar_s - r_s = {r_bar_s - r_s:.6g}")
    if not epsilon > 0:
        violations.append(f"epsilon={epsilon} must be positive")
    if 0 < gamma <= r_s:
        warnings.append(f"gamma={gamma} <= r_s={r_s}; the stricter range (r_s, r_bar_s - r_s) is not met")
    return FeasibilityReport(
        min_pair_separation=float(r_bar),
        d0=float(d0),
        r_bar_s=float(r_bar_s),
        ok=not violations,
        violations=violations,
        warnings=warnings,
    )
