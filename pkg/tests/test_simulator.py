import math
from dataclasses import replace

import numpy as np
import pytest

import corpus
from hybridnav import simulator
from hybridnav.controller import ControllerParams, HybridState, in_flow_set, in_jump_set
from hybridnav.geometry import Sphere
from hybridnav.simulator import (
    HybridTrajectory,
    Outcome,
    Sample,
    SimConfig,
    audit,
    detect_jump,
    flow_step,
    run,
)
from hybridnav.world import World

EMPTY = World([], 0.1, 0.1)
BALL = Sphere([2, 0, 0], 0.5)


def params(**kw):
    base = dict(kappa_s=1.0, kappa_r=0.5, gamma=0.4, epsilon=0.1, r_a=0.2)
    base.update(kw)
    return ControllerParams.create(**base)


def ball_world():
    return World([BALL], 0.1, 0.1)


# --- flow ---------------------------------------------------------------------

def test_flow_step_matches_exponential():
    p = params(kappa_s=1.3)
    x0 = np.array([1.0, 2.0, -0.5])
    xi = HybridState.initial(x0)
    nxt = flow_step(xi, EMPTY, p, 0.01)
    np.testing.assert_allclose(nxt.x, x0 * math.exp(-1.3 * 0.01), atol=1e-10, rtol=0)
    assert nxt.s == pytest.approx(0.01)
    np.testing.assert_array_equal(nxt.h, xi.h)
    np.testing.assert_array_equal(nxt.a, xi.a)
    assert nxt.m == xi.m and nxt.s0 == xi.s0


def test_flow_step_derivative_at_zero():
    xi = HybridState.initial([1.0, 0, 0])
    dt = 1e-7
    v = (flow_step(xi, EMPTY, params(), dt).x - xi.x) / dt
    np.testing.assert_allclose(v, [-1, 0, 0], atol=1e-6)


def test_flow_step_avoidance_keeps_discrete_state():
    w, p = ball_world(), params()
    xi = HybridState([2.0, 0.95, 0], [3, 0, 0], [0, 0, 1], 1, 1.0, 0.0)
    nxt = flow_step(xi, w, p, 1e-3)
    np.testing.assert_array_equal(nxt.h, xi.h)
    np.testing.assert_array_equal(nxt.a, xi.a)
    assert nxt.m == 1 and abs(nxt.x[2]) <= 1e-15


# --- events ---------------------------------------------------------------------

def test_detect_jump_radial_approach():
    w, p = ball_world(), params()
    crossing = 2.0 + 0.5 + p.r_a + p.gamma_s  # |x| at which gap == gamma_s on the x axis
    x_prev = crossing + 0.005
    xi = HybridState.initial([x_prev, 0, 0])
    dt = 0.01
    nxt = flow_step(xi, w, p, dt)
    assert nxt.x[0] < crossing
    tau, hit = detect_jump(xi, nxt, w, p, dt=dt, tolerance=1e-6)
    gap = hit.x[0] - 2.5 - p.r_a
    assert abs(gap - p.gamma_s) <= 1e-6
    assert in_jump_set(hit, w, p)
    assert tau == pytest.approx(math.log(x_prev / crossing), abs=1e-6)


def test_detect_jump_none_without_membership_change():
    w, p = ball_world(), params()
    xi = HybridState.initial([5.0, 3.0, 0])
    assert detect_jump(xi, flow_step(xi, w, p, 0.01), w, p, dt=0.01) is None


def test_run_locates_first_hit_at_analytic_time():
    w, p = ball_world(), params()
    sim = SimConfig(t_max=2.0, lemma1_samples=0)
    traj = run(w, p, sim, HybridState.initial([4.0, 0, 0]))
    first = traj.jumps[0]
    crossing = 2.5 + p.r_a + p.gamma_s
    assert first.kind == "L0"
    assert first.t == pytest.approx(math.log(4.0 / crossing), abs=1e-6)
    assert abs(first.pre.x[0] - 2.5 - p.r_a - p.gamma_s) <= sim.event_tolerance


def test_boundary_state_jumps_before_flowing():
    w = ball_world()
    p = params(r_a=0.25, gamma_a=0.125, gamma_s=0.25)
    xi0 = HybridState.initial([3.0, 0, 0])  # gap exactly gamma_s
    assert in_jump_set(xi0, w, p) and in_flow_set(xi0, w, p)
    traj = run(w, p, SimConfig(t_max=0.01, lemma1_samples=0), xi0)
    assert traj.jumps[0].t == 0.0 and traj.jumps[0].kind == "L0"


# --- runs -----------------------------------------------------------------------

def test_obstacle_free_run_is_pure_exponential():
    p = params()
    traj = run(EMPTY, p, SimConfig(), HybridState.initial([1, 1, 1]))
    assert traj.outcome.kind == "converged"
    assert traj.jumps == []
    assert traj.outcome.t_final == pytest.approx(math.log(math.sqrt(3) / 1e-3), abs=2e-3)
    norms = [np.linalg.norm(s.state.x) for s in traj.samples]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    rep = audit(traj, EMPTY, p)
    assert rep.jump_count == 0 and rep.move_to_target_monotone and rep.passed
    for s in traj.samples[::500]:
        np.testing.assert_allclose(s.state.x, np.ones(3) * math.exp(-s.t), atol=1e-9)


@pytest.mark.parametrize("x0,h", [
    ([0.3, 0.2, 3.5], None),          # far from everything
    ([3.1, 0.0, 0.0], [3.4, 0, 0]),   # inside the band of the ball
    ([2.0, 0.95, 0.0], None),         # exit region
])
def test_initial_avoidance_mode_switches_immediately(x0, h):
    w, p = ball_world(), params()
    xi0 = HybridState.initial(x0, m=1, h=h, a=[0, 1, 0] if x0[1] == 0 else [0, 0, 1], s=0.7)
    traj = run(w, p, SimConfig(t_max=0.05, lemma1_samples=0), xi0)
    first = traj.jumps[0]
    assert (first.kind, first.t, first.j) == ("L1", 0.0, 0)
    assert first.pre is xi0
    assert traj.samples[0].t == 0.0 and traj.samples[0].j == 0
    assert traj.samples[1].j == 1 and traj.samples[1].state.m == 0 and traj.samples[1].t == 0.0


def test_fault_when_jumps_are_suppressed(monkeypatch):
    w, p = ball_world(), params()
    monkeypatch.setattr(simulator, "exact_jump_test", lambda world, prm: (lambda xi: False))
    traj = run(w, p, SimConfig(t_max=5.0, lemma1_samples=0), HybridState.initial([4.0, 0, 0]))
    assert traj.outcome.kind == "fault"
    assert "safety" in traj.outcome.message
    assert traj.samples[-1].gap < 0


def test_sensed_pipeline_needs_sensor():
    with pytest.raises(ValueError):
        run(EMPTY, params(), SimConfig(pipeline="sensed"), HybridState.initial([1, 0, 0]))


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt_max=0)
    with pytest.raises(ValueError):
        SimConfig(pipeline="magic")
    with pytest.raises(ValueError):
        SimConfig(record_stride=0)


def test_max_time_outcome():
    traj = run(EMPTY, params(), SimConfig(t_max=0.5), HybridState.initial([1, 1, 1]))
    assert traj.outcome.kind == "max_time" and traj.outcome.t_final == pytest.approx(0.5)


def test_lemma1_witness_recorded_at_every_hit():
    w, p = ball_world(), params()
    traj = run(w, p, SimConfig(t_max=30.0), HybridState.initial([4.0, 0.3, 0.2]))
    l0 = [jp for jp in traj.jumps if jp.kind == "L0"]
    assert len(traj.lemma1) == len(l0) >= 1
    for chk, jp in zip(traj.lemma1, l0):
        assert chk.found and chk.obstacle_index == 1
        assert np.linalg.norm(chk.witness) <= np.linalg.norm(jp.post.h) - p.epsilon
    assert traj.outcome.kind == "converged"


# --- audit ----------------------------------------------------------------------

def _sample(t, j, x, m=0, h=None, a=(0, 0, 1), s=None, gap=1.0):
    x = np.asarray(x, float)
    st = HybridState(x, x if h is None else h, a, m, t + j if s is None else s, 0.0)
    return Sample(t, j, st, np.zeros(3), gap, 1)


def _traj(samples):
    return HybridTrajectory(samples=samples, outcome=Outcome("converged", samples[-1].t))


def test_audit_flags_unsafe_gap():
    rep = audit(_traj([_sample(0, 0, [1, 0, 0]), _sample(0.1, 0, [0.5, 0, 0], gap=-1e-3),
                       _sample(0.2, 0, [0, 0, 1e-4])]), EMPTY, params())
    assert not rep.safety_ok and not rep.passed


def test_audit_flags_hyperplane_escape_and_alternation():
    p = params()
    h = np.array([3.0, 0, 0])
    s = [
        _sample(0, 0, [3, 0, 0], m=0, gap=0.2),
        _sample(0, 1, [3, 0, 0], m=1, h=h, gap=0.2),
        _sample(0.1, 1, [2.9, 0.1, 0.01], m=1, h=h, gap=0.2),  # leaves the plane z = 0
        _sample(0.1, 2, [2.9, 0.1, 0.01], m=1, h=h, gap=0.2),  # second jump keeps m = 1
        _sample(0.2, 2, [0, 0, 1e-4], m=1, h=h, gap=0.3),
    ]
    rep = audit(_traj(s), EMPTY, p)
    assert rep.hyperplane_residual == pytest.approx(0.01)
    assert not rep.hyperplane_ok
    assert not rep.alternation_ok


def test_audit_flags_insufficient_progress():
    p = params()
    s = [
        _sample(0, 0, [3, 0, 0], gap=0.2),
        _sample(0, 1, [3, 0, 0], m=1, h=[3, 0, 0], gap=0.2),
        _sample(1, 1, [2.95, 0.1, 0], m=1, h=[3, 0, 0], gap=0.2),
        _sample(1, 2, [2.95, 0.1, 0], m=0, h=[3, 0, 0], gap=0.2),
        _sample(1, 3, [2.95, 0.1, 0], m=1, h=[2.95, 0.1, 0], gap=0.2),  # |h| dropped by ~0.05 < epsilon
        _sample(2, 3, [0, 0, 1e-4], m=1, h=[2.95, 0.1, 0], gap=0.2),
    ]
    rep = audit(_traj(s), EMPTY, p)
    assert rep.l0_count == 2 and rep.hit_decrements[0] < p.epsilon
    assert not rep.progress_ok


def test_audit_flags_non_monotone_move_to_target_and_band_exit():
    p = params()
    s = [_sample(0, 0, [1, 0, 0]), _sample(0.1, 0, [1.1, 0, 0]), _sample(0.2, 0, [0, 0, 1e-4])]
    assert not audit(_traj(s), EMPTY, p).move_to_target_monotone
    s = [_sample(0, 0, [3, 0, 0]), _sample(0, 1, [3, 0, 0], m=1, gap=0.3),
         _sample(0.1, 1, [3, 0.1, 0], m=1, h=[3, 0, 0], gap=p.gamma + 1e-3),
         _sample(0.2, 1, [0, 0, 1e-4], m=1, h=[3, 0, 0], gap=0.3)]
    assert not audit(_traj(s), EMPTY, p).neighborhood_ok


def test_audit_flags_non_convergence():
    rep = audit(_traj([_sample(0, 0, [1, 0, 0]), _sample(1, 0, [0.5, 0, 0])]), EMPTY, params())
    assert not rep.converged and not rep.passed


# --- corpus invariants ------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("name", corpus.FEASIBLE)
def test_corpus_invariants_exact(name):
    for traj, rep, _ in corpus.runs(name):
        assert traj.outcome.kind == "converged"
        assert rep.min_gap >= 0
        assert rep.hyperplane_residual <= 1e-4
        assert rep.progress_ok and rep.alternation_ok and rep.neighborhood_ok
        assert rep.move_to_target_monotone
        assert rep.jump_count == len(traj.jumps) < 1000
        assert rep.passed, rep.checks()
        assert all(chk.found for chk in traj.lemma1)


@pytest.mark.slow
@pytest.mark.parametrize("name", corpus.FEASIBLE)
def test_corpus_invariants_sensed(name):
    for traj, rep, _ in corpus.runs(name, "sensed"):
        assert traj.outcome.kind == "converged"
        assert rep.min_gap >= 0
        assert rep.hyperplane_residual <= 1e-4
        assert rep.progress_ok and rep.alternation_ok and rep.neighborhood_ok
        assert rep.passed, rep.checks()


@pytest.mark.slow
@pytest.mark.parametrize("name", corpus.FEASIBLE)
def test_corpus_sensed_switch_times_agree(name):
    sc = corpus.scenario(name)
    tol = 5 * sc.sim_config().dt_max
    assert sc.sensor.angular_resolution >= 4096
    for (ex, _, _), (se, rep, _) in zip(corpus.runs(name), corpus.runs(name, "sensed")):
        assert se.outcome.kind == "converged" and rep.min_gap >= 0
        a, b = ex.switch_times(), se.switch_times()
        assert [k for k, _ in a] == [k for k, _ in b], (a, b)
        assert max(abs(ta - tb) for (_, ta), (_, tb) in zip(a, b)) <= tol


def test_record_stride_thins_samples_but_keeps_jumps():
    w, p = ball_world(), params()
    xi0 = HybridState.initial([4.0, 0.3, 0.2])
    full = run(w, p, SimConfig(t_max=3.0, lemma1_samples=0), xi0)
    thin = run(w, p, replace(SimConfig(t_max=3.0, lemma1_samples=0), record_stride=50), xi0)
    assert len(thin.samples) < len(full.samples) / 10
    assert thin.switch_times() == full.switch_times()
    assert {s.j for s in thin.samples} == {s.j for s in full.samples}
