"""Hybrid feedback law: mode-dependent velocity, flow/jump set membership and
the jump (update) maps.

The state is ``HybridState(x, h, a, m, s)`` with ``m = 0`` for move-to-target
and ``m = 1`` for obstacle avoidance. All membership tests work on exact
geometry; :mod:`hybridnav.sensor` provides the sensed counterparts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .geometry import Segment, rotation_about, tangent_projector, vec3
from .world import World, nearest_obstacle

ORIGIN = np.zeros(3)


class DegenerateProjection(ValueError):
    pass


class ZeroState(ValueError):
    pass


@dataclass(frozen=True)
class ControllerParams:
    kappa_s: float
    kappa_r: float
    gamma: float
    gamma_a: float
    gamma_s: float
    epsilon: float
    r_a: float

    def __post_init__(self):
        if not (self.kappa_s > 0 and self.kappa_r > 0):
            raise ValueError("gains must be positive")
        if not 0 < self.gamma_a < self.gamma_s < self.gamma:
            raise ValueError("need 0 < gamma_a < gamma_s < gamma")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def create(cls, kappa_s, kappa_r, gamma, epsilon, r_a, gamma_a=None, gamma_s=None):
        """Build params; the hysteresis thresholds default to gamma/3 and 2*gamma/3."""
        return cls(
            kappa_s=float(kappa_s),
            kappa_r=float(kappa_r),
            gamma=float(gamma),
            gamma_a=float(gamma / 3.0 if gamma_a is None else gamma_a),
            gamma_s=float(2.0 * gamma / 3.0 if gamma_s is None else gamma_s),
            epsilon=float(epsilon),
            r_a=float(r_a),
        )


@dataclass(frozen=True, eq=False)
class HybridState:
    x: np.ndarray
    h: np.ndarray
    a: np.ndarray
    m: int
    s: float
    s0: float

    def __post_init__(self):
        for name in ("x", "h", "a"):
            object.__setattr__(self, name, vec3(getattr(self, name)))
        if self.m not in (0, 1):
            raise ValueError(f"mode must be 0 or 1, got {self.m}")
        if abs(float(np.linalg.norm(self.a)) - 1.0) > 1e-6:
            raise ValueError("a must be a unit vector")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "s0", float(self.s0))

    @classmethod
    def initial(cls, x, m: int = 0, h=None, a=None, s: float = 0.0) -> HybridState:
        x = vec3(x)
        return cls(
            x=x,
            h=x if h is None else h,
            a=(0.0, 0.0, 1.0) if a is None else a,
            m=m,
            s=s,
            s0=s,
        )

    def with_x(self, x) -> HybridState:
        return replace(self, x=x)

    def _flowed(self, x: np.ndarray, s: float) -> HybridState:
        """Copy with new ``x`` and ``s``, skipping validation (integrator hot path)."""
        new = object.__new__(HybridState)
        new.__dict__.update(self.__dict__, x=x, s=s)
        return new


def gap(x, world: World) -> float:
    """Clearance beyond the augmented radius: ``d(x, O_W) - r_a``."""
    return nearest_obstacle(world, x).distance - world.r_a


def eta(d_surface: float, params: ControllerParams) -> float:
    g = d_surface - params.r_a
    if g >= params.gamma_s:
        return -1.0
    if g <= params.gamma_a:
        return 1.0
    return 1.0 - (g - params.gamma_a) / (0.5 * (params.gamma_s - params.gamma_a))


@lru_cache(maxsize=64)
def _plane_operators(key: bytes) -> tuple[np.ndarray, np.ndarray]:
    a = np.frombuffer(key)
    return rotation_about(a), tangent_projector(a)


def avoidance_field(x, a, world: World, params: ControllerParams) -> np.ndarray:
    hit = nearest_obstacle(world, x)
    if hit.obstacle_index is None or not math.sqrt(hit.x_pi @ hit.x_pi) >= 1e-9:
        raise DegenerateProjection(f"no usable closest point for x={np.asarray(x)}")
    e = eta(hit.distance, params)
    rot, proj = _plane_operators(np.asarray(a, dtype=float).tobytes())
    tangential = proj @ hit.x_pi
    return e * tangential + (1.0 - abs(e)) * (rot @ tangential)


def control(xi: HybridState, world: World, params: ControllerParams) -> np.ndarray:
    if xi.m == 0:
        return -params.kappa_s * xi.x
    return params.kappa_r * avoidance_field(xi.x, xi.a, world, params)


def _landing_with(x: np.ndarray, world: World, params: ControllerParams) -> bool:
    dists, _ = world.probe(x)
    seg = Segment(x, ORIGIN)
    lo, hi = params.r_a, params.r_a + params.gamma
    for i, d in enumerate(dists):
        if lo <= d <= hi and world.segment_distance(seg, i) < params.r_a:
            return True
    return False


def in_landing_region(x, world: World, params: ControllerParams) -> bool:
    return _landing_with(np.asarray(x, dtype=float), world, params)


def _in_band(d: float, params: ControllerParams) -> bool:
    return params.r_a <= d <= params.r_a + params.gamma


def in_exit_region(x, world: World, params: ControllerParams) -> bool:
    x = np.asarray(x, dtype=float)
    return _in_band(nearest_obstacle(world, x).distance, params) and not _landing_with(x, world, params)


def in_jump_set_0(x, world: World, params: ControllerParams) -> bool:
    x = np.asarray(x, dtype=float)
    if nearest_obstacle(world, x).distance - params.r_a > params.gamma_s:
        return False
    return _landing_with(x, world, params)


def in_flow_set_0(x, world: World, params: ControllerParams) -> bool:
    x = np.asarray(x, dtype=float)
    if nearest_obstacle(world, x).distance - params.r_a >= params.gamma_s:
        return True
    return in_exit_region(x, world, params)


def _near_boundary(x: np.ndarray, world: World, params: ControllerParams) -> bool:
    if not world.bounded:
        return False
    return _in_band(float(world.probe(x)[0][0]), params)


def _exit_and_closer(xi: HybridState, world: World, params: ControllerParams) -> bool:
    closer = np.linalg.norm(xi.h) - np.linalg.norm(xi.x) >= params.epsilon
    return bool(closer) and in_exit_region(xi.x, world, params)


def in_jump_set_1(xi: HybridState, world: World, params: ControllerParams) -> bool:
    if xi.s == xi.s0:
        return True
    if nearest_obstacle(world, xi.x).distance - params.r_a >= params.gamma:
        return True
    return _exit_and_closer(xi, world, params) or _near_boundary(xi.x, world, params)


def in_flow_set_1(xi: HybridState, world: World, params: ControllerParams) -> bool:
    if xi.s == xi.s0:
        return False
    if nearest_obstacle(world, xi.x).distance - params.r_a > params.gamma:
        return False
    return not (_exit_and_closer(xi, world, params) or _near_boundary(xi.x, world, params))


def in_jump_set(xi: HybridState, world: World, params: ControllerParams) -> bool:
    if xi.m == 0:
        return in_jump_set_0(xi.x, world, params)
    return in_jump_set_1(xi, world, params)


def in_flow_set(xi: HybridState, world: World, params: ControllerParams) -> bool:
    if xi.m == 0:
        return in_flow_set_0(xi.x, world, params)
    return in_flow_set_1(xi, world, params)


def _perpendicular(x: np.ndarray) -> np.ndarray:
    u = x / np.linalg.norm(x)
    for e in np.eye(3):
        r = e - (e @ u) * u
        n = np.linalg.norm(r)
        if n > 0.5:
            return r / n
    raise AssertionError("unreachable: some basis vector is far from any unit vector")


def choose_axis(x, world: World) -> np.ndarray:
    """Unit normal of the avoidance plane: through the target, ``x`` and the
    local obstacle direction when those are not collinear."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) < 1e-9:
        raise ZeroState("cannot choose an avoidance plane at the target")
    hit = nearest_obstacle(world, x)
    if hit.obstacle_index is not None:
        c = np.cross(x, hit.x_pi)
        n = np.linalg.norm(c)
        if n >= 1e-9:
            return c / n
    return _perpendicular(x)


def jump_update(xi: HybridState, world: World, params: ControllerParams) -> HybridState:
    if xi.m == 0:
        return replace(xi, h=xi.x.copy(), a=choose_axis(xi.x, world), m=1, s=xi.s + 1.0)
    return replace(xi, m=0, s=xi.s + 1.0)


def jump_kind(xi: HybridState) -> str:
    return "L0" if xi.m == 0 else "L1"

