"""Closed-loop simulation over a hybrid time domain.

Flows use fixed-step RK4; when a step lands in the jump set the step is
bisected until the crossing is bracketed within ``event_tolerance`` (in
position), then the jump map is applied. States in both the flow and the
jump set always jump.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import controller as ctl
from .controller import ControllerParams, HybridState
from .geometry import distances
from .sensor import SensorConfig, sensed_in_jump_set
from .world import World, nearest_obstacle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    dt_max: float = 1e-3
    event_tolerance: float = 1e-6
    convergence_radius: float = 1e-3
    t_max: float = 60.0
    pipeline: str = "exact"
    record_stride: int = 1
    lemma1_samples: int = 10_000
    max_jumps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (self.dt_max > 0 and self.event_tolerance > 0 and self.convergence_radius > 0):
            raise ValueError("dt_max, event_tolerance and convergence_radius must be positive")
        if self.pipeline not in ("exact", "sensed"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass(frozen=True)
class Sample:
    t: float
    j: int
    state: HybridState
    u: np.ndarray
    gap: float
    nearest_index: int | None


@dataclass(frozen=True)
class Jump:
    t: float
    j: int
    kind: str
    pre: HybridState
    post: HybridState


@dataclass(frozen=True)
class Outcome:
    kind: str  # "converged" | "max_time" | "fault"
    t_final: float
    message: str = ""


@dataclass(frozen=True)
class Lemma1Check:
    t: float
    j: int
    obstacle_index: int | None
    samples: int
    found: bool
    witness: np.ndarray | None


@dataclass
class HybridTrajectory:
    samples: list[Sample] = field(default_factory=list)
    jumps: list[Jump] = field(default_factory=list)
    outcome: Outcome | None = None
    lemma1: list[Lemma1Check] = field(default_factory=list)

    def switch_times(self) -> list[tuple[str, float]]:
        return [(jp.kind, jp.t) for jp in self.jumps]


# ---------------------------------------------------------------------------
# Flow and events
# ---------------------------------------------------------------------------

def _velocity(x: np.ndarray, xi: HybridState, world: World, params: ControllerParams) -> np.ndarray:
    if xi.m == 0:
        return -params.kappa_s * x
    return params.kappa_r * ctl.avoidance_field(x, xi.a, world, params)


def flow_step(xi: HybridState, world: World, params: ControllerParams, dt: float) -> HybridState:
    """One RK4 step of ``x' = u`` with ``h, a, m`` frozen and ``s' = 1``."""
    x = xi.x
    k1 = _velocity(x, xi, world, params)
    k2 = _velocity(x + 0.5 * dt * k1, xi, world, params)
    k3 = _velocity(x + 0.5 * dt * k2, xi, world, params)
    k4 = _velocity(x + dt * k3, xi, world, params)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return xi._flowed(x_new, xi.s + dt)


JumpTest = Callable[[HybridState], bool]


def exact_jump_test(world: World, params: ControllerParams) -> JumpTest:
    return lambda xi: ctl.in_jump_set(xi, world, params)


def sensed_jump_test(world: World, params: ControllerParams, cfg: SensorConfig) -> JumpTest:
    return lambda xi: sensed_in_jump_set(xi, world, params, cfg)


def detect_jump(
    xi_prev: HybridState,
    xi_next: HybridState,
    world: World,
    params: ControllerParams,
    *,
    dt: float,
    tolerance: float = 1e-6,
    in_jump: JumpTest | None = None,
) -> tuple[float, HybridState] | None:
    """Locate the first jump-set entry inside a flow step.

    Returns ``(tau, state)`` with ``state`` in the jump set and no further
    than ``tolerance`` from a flow-set state reached at an earlier time, or
    ``None`` when ``xi_next`` is not in the jump set.
    """
    in_jump = in_jump or exact_jump_test(world, params)
    if not in_jump(xi_next):
        return None
    lo, hi = 0.0, dt
    x_lo, hi_state = xi_prev.x, xi_next
    while np.linalg.norm(hi_state.x - x_lo) > tolerance and hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        mid_state = flow_step(xi_prev, world, params, mid)
        if in_jump(mid_state):
            hi, hi_state = mid, mid_state
        else:
            lo, x_lo = mid, mid_state.x
    return hi, hi_state


# ---------------------------------------------------------------------------
# Lemma 1 sampling check
# ---------------------------------------------------------------------------

def lemma1_check(
    world: World, params: ControllerParams, h: np.ndarray, index: int | None, n: int, rng: np.random.Generator
) -> tuple[bool, np.ndarray | None]:
    """Search the engaged obstacle's neighborhood band for an exit-region point
    at least ``epsilon`` closer to the target than the hit point."""
    if index is None or index == 0 or n <= 0:
        return False, None
    shape = world.shape(index)
    reach = params.r_a + params.gamma
    lo, hi = shape.aabb()
    pts = rng.uniform(lo - reach, hi + reach, size=(n, 3))
    d = distances(pts, shape)
    norms = np.linalg.norm(pts, axis=1)
    ok = (d >= params.r_a) & (d <= reach) & (norms <= np.linalg.norm(h) - params.epsilon)
    for k in np.flatnonzero(ok)[np.argsort(norms[ok], kind="stable")]:
        if ctl.in_exit_region(pts[k], world, params):
            return True, pts[k]
    return False, None


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

def _sample(t: float, j: int, xi: HybridState, world: World, params: ControllerParams) -> Sample:
    hit = nearest_obstacle(world, xi.x)
    u = ctl.control(xi, world, params)
    return Sample(t, j, xi, u, hit.distance - world.r_a, hit.obstacle_index)


def run(
    world: World,
    params: ControllerParams,
    sim: SimConfig,
    xi0: HybridState,
    sensor: SensorConfig | None = None,
) -> HybridTrajectory:
    if sim.pipeline == "sensed":
        if sensor is None:
            raise ValueError("sensed pipeline needs a SensorConfig")
        sensor.check(params)
        in_jump = sensed_jump_test(world, params, sensor)
    else:
        in_jump = exact_jump_test(world, params)
    rng = np.random.default_rng(sim.seed)
    traj = HybridTrajectory()
    t, j, xi = 0.0, 0, xi0
    steps = 0
    try:
        traj.samples.append(_sample(t, j, xi, world, params))
        jump_now = in_jump(xi)
        while True:
            if np.linalg.norm(xi.x) <= sim.convergence_radius:
                traj.outcome = Outcome("converged", t)
                break
            if jump_now:
                kind = ctl.jump_kind(xi)
                post = ctl.jump_update(xi, world, params)
                traj.jumps.append(Jump(t, j, kind, xi, post))
                if kind == "L0":
                    idx = nearest_obstacle(world, xi.x).obstacle_index
                    found, witness = lemma1_check(world, params, post.h, idx, sim.lemma1_samples, rng)
                    traj.lemma1.append(Lemma1Check(t, j, idx, sim.lemma1_samples, found, witness))
                    if not found and sim.lemma1_samples > 0:
                        log.warning("no epsilon-closer exit point found near obstacle %s at t=%.4f", idx, t)
                j += 1
                xi = post
                if not traj.samples or traj.samples[-1].state is not traj.jumps[-1].pre:
                    traj.samples.append(_sample(t, j - 1, traj.jumps[-1].pre, world, params))
                traj.samples.append(_sample(t, j, xi, world, params))
                if len(traj.jumps) > sim.max_jumps:
                    traj.outcome = Outcome("fault", t, f"more than {sim.max_jumps} jumps")
                    break
                jump_now = in_jump(xi)
                continue
            if t >= sim.t_max:
                traj.outcome = Outcome("max_time", t)
                break
            dt = min(sim.dt_max, sim.t_max - t)
            nxt = flow_step(xi, world, params, dt)
            event = detect_jump(xi, nxt, world, params, dt=dt, tolerance=sim.event_tolerance, in_jump=in_jump)
            if event is not None:
                dt, nxt = event
            t += dt
            xi = nxt
            jump_now = event is not None
            steps += 1
            hit = nearest_obstacle(world, xi.x)
            g = hit.distance - world.r_a
            if g < 0:
                traj.samples.append(_sample(t, j, xi, world, params))
                traj.outcome = Outcome("fault", t, f"safety violation: gap {g:.3e} < 0")
                break
            if jump_now or steps % sim.record_stride == 0 or np.linalg.norm(xi.x) <= sim.convergence_radius:
                traj.samples.append(_sample(t, j, xi, world, params))
    except (ctl.DegenerateProjection, ctl.ZeroState) as exc:
        traj.outcome = Outcome("fault", t, f"{type(exc).__name__}: {exc}")
    return traj


# ---------------------------------------------------------------------------
# Audit
# ---------------------------------------------------------------------------

HYPERPLANE_TOL = 1e-4
PROGRESS_SLACK = 1e-6


@dataclass
class AuditReport:
    min_gap: float
    hyperplane_residual: float
    jump_count: int
    l0_count: int
    l1_count: int
    alternation_ok: bool
    hit_norms: list[float]
    hit_decrements: list[float]
    progress_ok: bool
    move_to_target_monotone: bool
    avoidance_gap_range: tuple[float, float]
    neighborhood_ok: bool
    final_norm: float
    converged: bool

    @property
    def safety_ok(self) -> bool:
        return self.min_gap >= 0.0

    @property
    def hyperplane_ok(self) -> bool:
        return self.hyperplane_residual <= HYPERPLANE_TOL

    def checks(self) -> dict[str, bool]:
        return {
            "safety": self.safety_ok,
            "hyperplane_confinement": self.hyperplane_ok,
            "alternation": self.alternation_ok,
            "progress": self.progress_ok,
            "move_to_target_monotone": self.move_to_target_monotone,
            "neighborhood_confinement": self.neighborhood_ok,
            "converged": self.converged,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": self.checks(),
            "min_gap": self.min_gap,
            "hyperplane_residual": self.hyperplane_residual,
            "jump_count": self.jump_count,
            "l0_count": self.l0_count,
            "l1_count": self.l1_count,
            "hit_norms": self.hit_norms,
            "hit_decrements": self.hit_decrements,
            "avoidance_gap_range": list(self.avoidance_gap_range),
            "final_norm": self.final_norm,
        }


def jumps_from_samples(samples: list[Sample]) -> list[Jump]:
    """Rebuild the jump list from consecutive samples whose ``j`` increments."""
    out = []
    for prev, cur in zip(samples, samples[1:]):
        if cur.j == prev.j + 1:
            out.append(Jump(cur.t, prev.j, "L0" if prev.state.m == 0 else "L1", prev.state, cur.state))
    return out


def audit(
    traj: HybridTrajectory,
    world: World,
    params: ControllerParams,
    *,
    convergence_radius: float = 1e-3,
    event_tolerance: float = 1e-6,
) -> AuditReport:
    samples = traj.samples
    jumps = jumps_from_samples(samples)
    gaps = [s.gap for s in samples]
    min_gap = float(min(gaps)) if gaps else math.inf

    avoid = [s for s in samples if s.state.m == 1 and s.state.s != s.state.s0]
    residual = max((abs(float(s.state.a @ (s.state.x - s.state.h))) for s in avoid), default=0.0)
    avoid_gaps = [s.gap for s in avoid]
    gap_range = (min(avoid_gaps, default=math.nan), max(avoid_gaps, default=math.nan))
    neighborhood_ok = all(0.0 <= g <= params.gamma + event_tolerance for g in avoid_gaps)

    kinds = [jp.kind for jp in jumps]
    start = 1 if kinds[:1] == ["L1"] else 0
    alternation_ok = all(k == ("L0" if i % 2 == 0 else "L1") for i, k in enumerate(kinds[start:]))
    if kinds[:1] == ["L1"] and samples[0].state.m != 1:
        alternation_ok = False
    if any(jp.post.m == jp.pre.m for jp in jumps):  # every jump flips the mode
        alternation_ok = False

    hit_norms = [float(np.linalg.norm(jp.post.h)) for jp in jumps if jp.kind == "L0"]
    decrements = [a - b for a, b in zip(hit_norms, hit_norms[1:])]
    progress_ok = all(d >= params.epsilon - PROGRESS_SLACK for d in decrements)

    monotone = True
    for prev, cur in zip(samples, samples[1:]):
        if prev.j == cur.j and cur.state.m == 0:
            if np.linalg.norm(cur.state.x) > np.linalg.norm(prev.state.x) * (1 + 1e-12):
                monotone = False
                break

    final_norm = float(np.linalg.norm(samples[-1].state.x)) if samples else math.nan
    return AuditReport(
        min_gap=min_gap,
        hyperplane_residual=float(residual),
        jump_count=len(jumps),
        l0_count=kinds.count("L0"),
        l1_count=kinds.count("L1"),
        alternation_ok=alternation_ok,
        hit_norms=hit_norms,
        hit_decrements=decrements,
        progress_ok=progress_ok,
        move_to_target_monotone=monotone,
        avoidance_gap_range=gap_range,
        neighborhood_ok=neighborhood_ok,
        final_norm=final_norm,
        converged=bool(final_norm <= convergence_radius),
    )
