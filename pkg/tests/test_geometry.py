import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import equivalence
import oracles
from hybridnav.geometry import (
    ConvexPolytope,
    HalfspaceBox,
    NonUnitAxis,
    Segment,
    Sphere,
    ZeroAxis,
    distance,
    pair_distance,
    project,
    rotation_about,
    segment_distance,
    skew,
    tangent_projector,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec = st.tuples(finite, finite, finite).map(np.array)
unit = vec.filter(lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: v / np.linalg.norm(v))

UNIT_CUBE = HalfspaceBox([0, 0, 0], [1, 1, 1])


# --- matrix operators -------------------------------------------------------

def test_skew_matches_cross_product_pattern():
    np.testing.assert_array_equal(skew([1, 0, 0]), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(skew(v) @ v, 0.0)


@given(vec, vec)
def test_skew_is_cross_product(v, w):
    np.testing.assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-9)
    np.testing.assert_array_equal(skew(v), -skew(v).T)


def test_rotation_about_examples():
    np.testing.assert_allclose(rotation_about([0, 0, 1]), [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    a = np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(rotation_about(a) @ a, a, atol=1e-15)


def test_rotation_about_diagonal_matches_rodrigues():
    a = np.ones(3) / math.sqrt(3)
    R = rotation_about(a)
    np.testing.assert_allclose(R, oracles.rodrigues_quarter_turn(a), atol=1e-12)
    assert np.linalg.norm(R.T @ R - np.eye(3)) <= 1e-9
    assert abs(np.linalg.det(R) - 1) <= 1e-9


def test_rotation_about_rejects_non_unit():
    with pytest.raises(NonUnitAxis):
        rotation_about([0, 0, 2])


@given(unit, vec)
def test_rotation_preserves_norms_and_is_so3(a, v):
    R = rotation_about(a)
    assert abs(np.linalg.norm(R @ v) - np.linalg.norm(v)) <= 1e-9 * max(1, np.linalg.norm(v))
    assert np.linalg.norm(R.T @ R - np.eye(3)) <= 1e-9
    assert abs(np.linalg.det(R) - 1) <= 1e-9
    np.testing.assert_allclose(R, oracles.rodrigues_quarter_turn(a), atol=1e-9)


def test_tangent_projector_examples():
    np.testing.assert_allclose(tangent_projector([0, 0, 1]), np.diag([1, 1, 0]))
    np.testing.assert_allclose(tangent_projector([0, 0, 2]) @ [3, 4, 0], [3, 4, 0])
    with pytest.raises(ZeroAxis):
        tangent_projector([0, 0, 0])


def test_tangent_projector_is_positive_semidefinite_on_samples():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        z, a = rng.normal(size=3), rng.normal(size=3)
        assert z @ tangent_projector(a) @ z >= -1e-12


@given(vec.filter(lambda v: np.linalg.norm(v) > 1e-3), vec)
def test_projector_properties_and_decomposition(a, v):
    P = tangent_projector(a)
    np.testing.assert_allclose(P @ P, P, atol=1e-9)
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    np.testing.assert_allclose(P @ a, 0, atol=1e-9 * np.linalg.norm(a))
    ah = a / np.linalg.norm(a)
    np.testing.assert_allclose((ah @ v) * ah + P @ v, v, atol=1e-9 * max(1, np.linalg.norm(v)))


# --- distance / projection examples -----------------------------------------

def test_distance_examples():
    s = Sphere([0, 0, 0], 1)
    assert distance([3, 0, 0], s) == pytest.approx(2.0, abs=1e-12)
    assert distance([0.2, 0.1, 0], s) == 0.0
    assert distance([0.5, 0.5, 0.5], UNIT_CUBE) == 0.0


def test_cube_corner_distance_against_surface_sampling():
    x = np.array([2.0, 2.0, 2.0])
    ref = oracles.cube_surface_distance(x)
    assert abs(distance(x, UNIT_CUBE) - ref) <= 1e-3
    assert distance(x, UNIT_CUBE) == pytest.approx(math.sqrt(3), abs=1e-12)
    cube = ConvexPolytope(UNIT_CUBE.vertices)
    assert abs(distance(x, cube) - ref) <= 1e-3


def test_project_examples():
    np.testing.assert_allclose(project([3, 0, 0], Sphere([0, 0, 0], 1)), [1, 0, 0])
    np.testing.assert_array_equal(project([0.5, 0.5, 0.5], UNIT_CUBE), [0.5, 0.5, 0.5])
    x = np.array([2, 0.5, -1])
    np.testing.assert_allclose(project(x, UNIT_CUBE), oracles.box_project(x, 0, 1), atol=1e-15)
    np.testing.assert_allclose(project(x, UNIT_CUBE), [1, 0.5, 0])
    np.testing.assert_allclose(project(x, ConvexPolytope(UNIT_CUBE.vertices)), [1, 0.5, 0], atol=1e-12)


def test_segment_distance_examples():
    ball = Sphere([0, 0, 0], 0.5)
    assert segment_distance(Segment([-2, 1, 0], [2, 1, 0]), ball) == pytest.approx(0.5, abs=1e-12)
    assert segment_distance(Segment([0.1, 0, 0], [4, 0, 0]), ball) == 0.0
    off = Sphere([2, 0.9, 0], 0.5)
    seg = Segment([3, 0, 0], [0, 0, 0])
    ref = oracles.segment_distance(seg.p, seg.q, lambda y: oracles.sphere_distance(y, off.center, off.radius))
    assert ref == pytest.approx(0.4, abs=1e-9)
    assert segment_distance(seg, off) == pytest.approx(ref, abs=1e-9)


def test_degenerate_segment_is_a_point():
    s = Sphere([0, 0, 3], 1)
    assert segment_distance(Segment([0, 0, 0], [0, 0, 0]), s) == pytest.approx(2.0)
    cube = ConvexPolytope(UNIT_CUBE.vertices)
    assert segment_distance(Segment([2, 2, 2], [2, 2, 2]), cube) == pytest.approx(math.sqrt(3))


def test_pair_distance_examples():
    assert pair_distance(Sphere([0, 0, 0], 1), Sphere([5, 0, 0], 1)) == pytest.approx(3.0)
    assert pair_distance(Sphere([0, 0, 0], 1), Sphere([1, 0, 0], 1)) == 0.0
    assert pair_distance(UNIT_CUBE, HalfspaceBox([0.5, 0.5, 0.5], [2, 2, 2])) == 0.0
    ball, box = Sphere([0, 0, 0], 1), HalfspaceBox([2, 2, 2], [3, 3, 3])
    ref = oracles.alternating_projection_distance(
        lambda y: ball.closest_point(y), lambda y: oracles.box_project(y, 2, 3), start=[5, -1, 4])
    assert ref == pytest.approx(2 * math.sqrt(3) - 1, abs=1e-9)
    assert pair_distance(ball, box) == pytest.approx(ref, abs=1e-9)
    assert pair_distance(box, ball) == pytest.approx(ref, abs=1e-9)
    assert pair_distance(ball, ConvexPolytope(box.vertices)) == pytest.approx(ref, abs=1e-9)


def test_polytope_pair_distance_against_alternating_projections():
    rng = np.random.default_rng(3)
    for _ in range(40):
        A = ConvexPolytope(equivalence.random_polytope(rng))
        B = ConvexPolytope(equivalence.random_polytope(rng) + rng.uniform(-4, 4, 3))
        oa, ob = oracles.PolytopeOracle(A.vertices), oracles.PolytopeOracle(B.vertices)
        ref = oracles.alternating_projection_distance(oa.project, ob.project, start=B.vertices[0])
        got = pair_distance(A, B)
        assert got == pytest.approx(pair_distance(B, A), abs=1e-12)
        # alternating projections converge slowly near touching sets; 1e-6 is what the oracle itself reaches
        assert abs(got - ref) <= 1e-6, (got, ref)


# --- oracle equivalence on random instances --------------------------------
# the 500-instance sweep is an acceptance criterion; here a smaller one with other seeds

@pytest.mark.parametrize("sweep", [equivalence.sphere_errors, equivalence.box_errors,
                                   equivalence.polytope_errors])
def test_oracle_equivalence(sweep):
    err = sweep(100, seed=101)
    assert max(err.values()) <= 1e-9, err


def test_polytope_drops_interior_vertices():
    rng = np.random.default_rng(5)
    V = np.vstack([UNIT_CUBE.vertices, rng.uniform(0.2, 0.8, size=(10, 3))])
    P = ConvexPolytope(V)
    assert len(P.vertices) == 8
    with pytest.raises(ValueError):
        ConvexPolytope([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


def test_projection_optimal_against_surface_samples():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        P = ConvexPolytope(equivalence.random_polytope(rng, 8))
        lo, hi = P.aabb()
        x = rng.uniform(lo - 1.5, hi + 1.5)
        p = project(x, P)
        # random convex combinations of vertices are points of P
        w = rng.dirichlet(np.ones(len(P.vertices)), size=64)
        samples = np.vstack([w @ P.vertices, P.vertices])
        assert np.linalg.norm(x - p) <= np.min(np.linalg.norm(samples - x, axis=1)) + 1e-6


# --- properties -------------------------------------------------------------

shapes = st.sampled_from([
    Sphere([0.5, -0.2, 1.0], 0.7),
    HalfspaceBox([-1, -0.5, 0], [0.5, 0.5, 1.5]),
    ConvexPolytope([[0, 0, 0], [1.2, 0, 0.1], [0, 1, 0], [0.2, 0.3, 1.1], [0.9, 0.8, 0.7]]),
])


@given(shapes, vec, vec)
def test_triangle_consistency(s, x, y):
    assert distance(x, s) <= np.linalg.norm(x - y) + distance(y, s) + 1e-9


@given(shapes, vec, vec)
def test_segment_distance_bounded_by_endpoints(s, p, q):
    assert segment_distance(Segment(p, q), s) <= min(distance(p, s), distance(q, s)) + 1e-12


@given(shapes, vec)
def test_projection_lies_in_shape_and_matches_distance(s, x):
    p = project(x, s)
    assert s.contains(p[None], tol=1e-9)[0]
    assert distance(x, s) == pytest.approx(float(np.linalg.norm(x - p)), abs=1e-12)
    assert (distance(x, s) == 0) == bool(s.contains(np.asarray(x)[None], tol=0.0)[0]) or distance(x, s) < 1e-9
