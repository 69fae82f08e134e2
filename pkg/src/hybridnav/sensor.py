"""Range-sensor model for a-priori unknown environments.

An ideal depth sensor casts rays from the robot center along a fixed
low-discrepancy pattern and returns the first boundary hit of each ray within
the sensing radius. Hits are labeled with the ground-truth obstacle index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import rays_hit_halfspaces, rays_hit_sphere
from .controller import ControllerParams, HybridState
from .geometry import HalfspaceBox, Sphere, point_segment_distance
from .world import World

ORIGIN = np.zeros(3)


class EmptyCloud(ValueError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    sensing_radius: float
    angular_resolution: int = 4096

    def __post_init__(self):
        if self.angular_resolution < 64:
            raise ValueError("angular_resolution must be >= 64 rays")
        if not self.sensing_radius > 0:
            raise ValueError("sensing radius must be positive")

    @property
    def angular_spacing(self) -> float:
        """Mean angle between neighbouring rays [rad]."""
        return math.sqrt(4.0 * math.pi / self.angular_resolution)

    @property
    def chord_error(self) -> float:
        """Gap between neighbouring ray hits at the sensing radius [m]."""
        return self.sensing_radius * self.angular_spacing

    def check(self, params: ControllerParams) -> None:
        if not self.sensing_radius > params.r_a + params.gamma:
            raise ValueError(
                f"sensing radius {self.sensing_radius} must exceed r_a + gamma = {params.r_a + params.gamma}"
            )


@dataclass(frozen=True, eq=False)
class BoundaryCloud:
    points: np.ndarray  # (K, 3)
    indices: np.ndarray  # (K,) obstacle index per point
    robot_center: np.ndarray

    def __len__(self):
        return len(self.points)

    def subset(self, mask) -> BoundaryCloud:
        return BoundaryCloud(self.points[mask], self.indices[mask], self.robot_center)


PLASTIC = 1.32471795724474602596


@lru_cache(maxsize=8)
def ray_directions(n: int) -> np.ndarray:
    """First ``n`` unit vectors of an R2 sequence mapped to the sphere by equal area.

    The pattern for ``n`` rays is a prefix of the one for ``2n``, so adding
    rays never moves an existing one.
    """
    k = np.arange(1, n + 1)
    u = (0.5 + k / PLASTIC) % 1.0
    v = (0.5 + k / PLASTIC**2) % 1.0
    z = 1.0 - 2.0 * u
    rho = np.sqrt(1.0 - z * z)
    phi = 2.0 * math.pi * v
    d = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    d.setflags(write=False)
    return d


def _ray_exit_box(x, dirs, box: HalfspaceBox) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(dirs > 0, (box.hi - x) / dirs, np.inf)
        t_lo = np.where(dirs < 0, (box.lo - x) / dirs, np.inf)
    return np.minimum(t_hi, t_lo).min(axis=1)


def scan(x, world: World, cfg: SensorConfig) -> BoundaryCloud:
    """First-hit boundary points within the sensing radius."""
    x = np.asarray(x, dtype=float)
    dirs = ray_directions(cfg.angular_resolution)
    best_i = np.full(len(dirs), -1, dtype=np.int64)
    if world.workspace is not None:
        best_t = _ray_exit_box(x, dirs, world.workspace)
        best_i[:] = 0
    else:
        best_t = np.full(len(dirs), np.inf)
    for i, s in enumerate(world.obstacles, start=1):
        c, rad = s.bounding_sphere()
        if np.linalg.norm(x - c) - rad > cfg.sensing_radius:
            continue
        if isinstance(s, Sphere):
            rays_hit_sphere(x, dirs, s.center, float(s.radius), best_t, best_i, i)
        else:
            A, b = s.halfspaces
            rays_hit_halfspaces(x, dirs, A, b, np.asarray(c, dtype=float), float(rad), best_t, best_i, i)
    keep = best_t <= cfg.sensing_radius
    pts = x + best_t[keep, None] * dirs[keep]
    return BoundaryCloud(pts, best_i[keep], x.copy())


def _nearest_index(cloud: BoundaryCloud) -> int:
    d = np.linalg.norm(cloud.points - cloud.robot_center, axis=1)
    best = d.min()
    return int(cloud.indices[d == best].min())


def closest_obstacle_boundary(cloud: BoundaryCloud) -> BoundaryCloud:
    """Points belonging to the obstacle that owns the nearest sensed point."""
    if len(cloud) == 0:
        raise EmptyCloud("no boundary points sensed")
    return cloud.subset(cloud.indices == _nearest_index(cloud))


def sensed_gap(cloud: BoundaryCloud) -> float:
    """Distance from the robot center to the nearest sensed point (``inf`` if none)."""
    if len(cloud) == 0:
        return math.inf
    return float(np.min(np.linalg.norm(cloud.points - cloud.robot_center, axis=1)))


def sensed_landing_test(subset: BoundaryCloud, x, r_a: float) -> bool:
    """True if a sensed point lies within ``r_a`` of the segment from ``x`` to the target."""
    if len(subset) == 0:
        return False
    x = np.asarray(x, dtype=float)
    return bool(np.any(point_segment_distance(subset.points, x, ORIGIN) < r_a))


def sensed_in_jump_set(xi: HybridState, world: World, params: ControllerParams, cfg: SensorConfig) -> bool:
    """Jump-set membership decided from sensor data only."""
    if xi.m == 1 and xi.s == xi.s0:
        return True
    cloud = scan(xi.x, world, cfg)
    d = sensed_gap(cloud)
    if xi.m == 0:
        if d > params.r_a + params.gamma_s:
            return False
        return sensed_landing_test(closest_obstacle_boundary(cloud), xi.x, params.r_a)
    if d > params.r_a + params.gamma:
        return True
    subset = closest_obstacle_boundary(cloud)
    if int(subset.indices[0]) == 0:
        return True
    if sensed_landing_test(subset, xi.x, params.r_a):
        return False
    return bool(np.linalg.norm(xi.x) <= np.linalg.norm(xi.h) - params.epsilon)
