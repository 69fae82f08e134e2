"""Convex geometry kernel: point/segment/set distances, projections, and the
small 3x3 operators used by the avoidance field.

Vectors are plain ``numpy`` arrays of shape ``(3,)``. Shapes expose batched
``closest_points`` so callers that need many queries (sampling checks, the
set-cover tests) can stay vectorized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull

from ._kernels import poly_closest_point, segment_clips_halfspaces, segment_edges_min_distance

TOL = 1e-9


class NonUnitAxis(ValueError):
    pass


class ZeroAxis(ValueError):
    pass


def vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector {v!r}")
    return a


# ---------------------------------------------------------------------------
# 3x3 operators
# ---------------------------------------------------------------------------

def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about(a, tol: float = 1e-6) -> np.ndarray:
    """Quarter-turn rotation about the unit axis ``a``, i.e. ``a a^T + skew(a)``."""
    a = np.asarray(a, dtype=float)
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > tol:
        raise NonUnitAxis(f"axis norm {n} is not 1")
    return np.outer(a, a) + skew(a)


def tangent_projector(a, tol: float = TOL) -> np.ndarray:
    """Orthogonal projector onto the plane normal to ``a`` (any nonzero length)."""
    a = np.asarray(a, dtype=float)
    n2 = float(a @ a)
    if n2 <= tol * tol:
        raise ZeroAxis("projector axis is zero")
    return np.eye(3) - np.outer(a, a) / n2


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    p: np.ndarray
    q: np.ndarray

    def point(self, lam: float) -> np.ndarray:
        return lam * self.p + (1.0 - lam) * self.q


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points, tol: float = TOL) -> np.ndarray:
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return d <= self.radius + tol

    def closest_point(self, x: np.ndarray) -> np.ndarray:
        d = x - self.center
        n = math.sqrt(d @ d)
        if n <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / n)

    def closest_points(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if len(P) == 1:
            return self.closest_point(P[0])[None]
        d = P - self.center
        n = np.linalg.norm(d, axis=1)
        out = P.copy()
        outside = n > self.radius
        out[outside] = self.center + d[outside] * (self.radius / n[outside])[:, None]
        return out

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        return self.center, self.radius


class _PolyhedralMixin:
    """Shared machinery for shapes stored as a triangulated convex hull."""

    vertices: np.ndarray

    @cached_property
    def _hull(self):
        hull = ConvexHull(self.vertices)
        tri = self.vertices[hull.simplices]  # (T, 3, 3)
        normals = hull.equations[:, :3]
        offsets = -hull.equations[:, 3]
        v0 = tri[:, 0]
        e1 = tri[:, 1] - v0
        e2 = tri[:, 2] - v0
        g00 = np.einsum("ij,ij->i", e1, e1)
        g01 = np.einsum("ij,ij->i", e1, e2)
        g11 = np.einsum("ij,ij->i", e2, e2)
        det = g00 * g11 - g01 * g01
        inv = np.stack([g11 / det, -g01 / det, g00 / det], axis=1)
        edges = set()
        for s in hull.simplices:
            for i, j in ((0, 1), (1, 2), (0, 2)):
                edges.add((min(s[i], s[j]), max(s[i], s[j])))
        edges = np.array(sorted(edges))
        ea = self.vertices[edges[:, 0]]
        eb = self.vertices[edges[:, 1]]
        # duplicate planes come from coplanar facets; keep one of each
        planes = np.round(np.hstack([normals, offsets[:, None]]), 9)
        _, keep = np.unique(planes, axis=0, return_index=True)
        keep.sort()
        return {
            "A": normals[keep],
            "b": offsets[keep],
            "tri_v0": v0,
            "tri_e1": e1,
            "tri_e2": e2,
            "tri_n": normals,
            "tri_inv": inv,
            "edge_a": ea,
            "edge_ab": eb - ea,
            "edge_len2": np.einsum("ij,ij->i", eb - ea, eb - ea),
        }

    @property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        h = self._hull
        return h["A"], h["b"]

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge start points and edge vectors."""
        h = self._hull
        return h["edge_a"], h["edge_ab"]

    def contains(self, points, tol: float = TOL) -> np.ndarray:
        P = np.atleast_2d(points)
        A, b = self.halfspaces
        return np.all(P @ A.T - b <= tol, axis=1)

    def closest_point(self, x: np.ndarray) -> np.ndarray:
        h = self._hull
        return poly_closest_point(
            x, h["A"], h["b"], h["tri_v0"], h["tri_n"], h["tri_e1"], h["tri_e2"],
            h["tri_inv"], h["edge_a"], h["edge_ab"], h["edge_len2"],
        )

    def closest_points(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if len(P) == 1:
            return self.closest_point(P[0])[None]
        h = self._hull
        # facet interiors
        w = P[:, None, :] - h["tri_v0"][None]
        height = np.einsum("ntk,tk->nt", w, h["tri_n"])
        inplane = w - height[..., None] * h["tri_n"][None]
        d1 = np.einsum("ntk,tk->nt", inplane, h["tri_e1"])
        d2 = np.einsum("ntk,tk->nt", inplane, h["tri_e2"])
        inv = h["tri_inv"]
        u = inv[:, 0] * d1 + inv[:, 1] * d2
        v = inv[:, 1] * d1 + inv[:, 2] * d2
        inside = (u >= -TOL) & (v >= -TOL) & (u + v <= 1.0 + TOL)
        face_d2 = np.where(inside, height * height, np.inf)
        fi = np.argmin(face_d2, axis=1)
        rows = np.arange(len(P))
        best_face = face_d2[rows, fi]
        face_pts = P - height[rows, fi][:, None] * h["tri_n"][fi]
        # edges (also covers vertices)
        w = P[:, None, :] - h["edge_a"][None]
        t = np.clip(np.einsum("nek,ek->ne", w, h["edge_ab"]) / h["edge_len2"], 0.0, 1.0)
        diff = w - t[..., None] * h["edge_ab"][None]
        ed2 = np.einsum("nek,nek->ne", diff, diff)
        ei = np.argmin(ed2, axis=1)
        best_edge = ed2[rows, ei]
        edge_pts = h["edge_a"][ei] + t[rows, ei][:, None] * h["edge_ab"][ei]
        out = np.where((best_face <= best_edge)[:, None], face_pts, edge_pts)
        inner = self.contains(P)
        out[inner] = P[inner]
        return out

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        lo, hi = self.aabb()
        c = 0.5 * (lo + hi)
        return c, float(np.max(np.linalg.norm(self.vertices - c, axis=1)))


@dataclass(frozen=True, eq=False)
class ConvexPolytope(_PolyhedralMixin):
    """Convex hull of a vertex list; interior points are dropped on creation."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 3 or len(V) < 4:
            raise ValueError("polytope needs at least 4 vertices in 3D")
        if not np.all(np.isfinite(V)):
            raise ValueError("non-finite polytope vertex")
        try:
            hull = ConvexHull(V)
        except Exception as exc:  # scipy raises QhullError for flat input
            raise ValueError(f"degenerate polytope: {exc}") from None
        object.__setattr__(self, "vertices", V[np.sort(hull.vertices)])


@dataclass(frozen=True, eq=False)
class HalfspaceBox(_PolyhedralMixin):
    """Axis-aligned box ``lo <= x <= hi``."""

    lo: np.ndarray
    hi: np.ndarray
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = vec3(self.lo), vec3(self.hi)
        if not np.all(lo < hi):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        corners = np.array([[(lo, hi)[(k >> i) & 1][i] for i in range(3)] for k in range(8)])
        object.__setattr__(self, "vertices", corners)

    def contains(self, points, tol: float = TOL) -> np.ndarray:
        P = np.atleast_2d(points)
        return np.all((P >= self.lo - tol) & (P <= self.hi + tol), axis=1)

    def closest_point(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lo), self.hi)

    def closest_points(self, points) -> np.ndarray:
        return np.clip(np.atleast_2d(np.asarray(points, dtype=float)), self.lo, self.hi)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo.copy(), self.hi.copy()


ConvexShape = Sphere | ConvexPolytope | HalfspaceBox


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def project(x, shape: ConvexShape) -> np.ndarray:
    """Closest point of ``shape`` to ``x``; ``x`` itself when inside."""
    return shape.closest_points(np.asarray(x, dtype=float)[None])[0]


def distance(x, shape: ConvexShape) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - project(x, shape)))


def distances(points, shape: ConvexShape) -> np.ndarray:
    P = np.atleast_2d(np.asarray(points, dtype=float))
    return np.linalg.norm(P - shape.closest_points(P), axis=1)


def point_segment_distance(points, p, q) -> np.ndarray:
    """Distance of each row of ``points`` to the segment ``[p, q]``."""
    P = np.atleast_2d(points)
    d = p - q
    dd = float(d @ d)
    if dd <= TOL * TOL:
        return np.linalg.norm(P - q, axis=1)
    lam = np.clip((P - q) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(P - (q + lam[:, None] * d), axis=1)


def segment_distance(seg: Segment, shape: ConvexShape) -> float:
    """Minimum distance between the segment and the shape (0 if they touch)."""
    p, q = np.asarray(seg.p, dtype=float), np.asarray(seg.q, dtype=float)
    if isinstance(shape, Sphere):
        d = point_segment_distance(shape.center[None], p, q)[0]
        return max(float(d) - shape.radius, 0.0)
    A, b = shape.halfspaces
    if segment_clips_halfspaces(p, q, A, b):
        return 0.0
    ea, eab = shape.edges
    best = min(distance(p, shape), distance(q, shape))
    return min(best, float(segment_edges_min_distance(p, q, ea, eab)))


def pair_distance(s1: ConvexShape, s2: ConvexShape) -> float:
    """Minimum distance between two convex shapes (0 if they intersect)."""
    if isinstance(s1, Sphere) and isinstance(s2, Sphere):
        return max(float(np.linalg.norm(s1.center - s2.center)) - s1.radius - s2.radius, 0.0)
    if isinstance(s1, Sphere):
        return max(distance(s1.center, s2) - s1.radius, 0.0)
    if isinstance(s2, Sphere):
        return max(distance(s2.center, s1) - s2.radius, 0.0)
    # Any intersection or closest pair between two polytopes involves an edge
    # of one of them meeting (or being nearest to) the other.
    best = np.inf
    for a, b in ((s1, s2), (s2, s1)):
        ea, eab = a.edges
        for start, vec in zip(ea, eab):
            best = min(best, segment_distance(Segment(start + vec, start), b))
            if best == 0.0:
                return 0.0
    return float(best)
