"""JIT kernels for the single-query polytope routines on the simulation hot path."""
import math

import numba
import numpy as np

TOL = 1e-9


@numba.njit(cache=True)
def poly_closest_point(x, A, b, v0, n, e1, e2, inv, ea, eab, len2):
    inside = True
    for k in range(A.shape[0]):
        if A[k, 0] * x[0] + A[k, 1] * x[1] + A[k, 2] * x[2] - b[k] > TOL:
            inside = False
            break
    out = x.copy()
    if inside:
        return out
    best = np.inf
    for k in range(v0.shape[0]):
        w0 = x[0] - v0[k, 0]
        w1 = x[1] - v0[k, 1]
        w2 = x[2] - v0[k, 2]
        h = w0 * n[k, 0] + w1 * n[k, 1] + w2 * n[k, 2]
        if h * h >= best:
            continue
        q0 = w0 - h * n[k, 0]
        q1 = w1 - h * n[k, 1]
        q2 = w2 - h * n[k, 2]
        d1 = q0 * e1[k, 0] + q1 * e1[k, 1] + q2 * e1[k, 2]
        d2 = q0 * e2[k, 0] + q1 * e2[k, 1] + q2 * e2[k, 2]
        u = inv[k, 0] * d1 + inv[k, 1] * d2
        v = inv[k, 1] * d1 + inv[k, 2] * d2
        if u >= -TOL and v >= -TOL and u + v <= 1.0 + TOL:
            best = h * h
            out[0] = x[0] - h * n[k, 0]
            out[1] = x[1] - h * n[k, 1]
            out[2] = x[2] - h * n[k, 2]
    for k in range(ea.shape[0]):
        w0 = x[0] - ea[k, 0]
        w1 = x[1] - ea[k, 1]
        w2 = x[2] - ea[k, 2]
        t = (w0 * eab[k, 0] + w1 * eab[k, 1] + w2 * eab[k, 2]) / len2[k]
        t = min(max(t, 0.0), 1.0)
        r0 = w0 - t * eab[k, 0]
        r1 = w1 - t * eab[k, 1]
        r2 = w2 - t * eab[k, 2]
        d = r0 * r0 + r1 * r1 + r2 * r2
        if d < best:
            best = d
            out[0] = ea[k, 0] + t * eab[k, 0]
            out[1] = ea[k, 1] + t * eab[k, 1]
            out[2] = ea[k, 2] + t * eab[k, 2]
    return out


@numba.njit(cache=True)
def segment_clips_halfspaces(p, q, A, b):
    """Whether ``q + lam (p - q)``, lam in [0, 1], meets ``A x <= b``."""
    lo = 0.0
    hi = 1.0
    for k in range(A.shape[0]):
        aq = A[k, 0] * q[0] + A[k, 1] * q[1] + A[k, 2] * q[2]
        ad = A[k, 0] * (p[0] - q[0]) + A[k, 1] * (p[1] - q[1]) + A[k, 2] * (p[2] - q[2])
        num = b[k] - aq
        if abs(ad) <= 1e-15:
            if num < -TOL:
                return False
            continue
        lam = num / ad
        if ad > 0:
            hi = min(hi, lam)
        else:
            lo = max(lo, lam)
        if lo > hi + TOL:
            return False
    return True


@numba.njit(cache=True)
def segment_edges_min_distance(p, q, ea, eab):
    """Smallest distance between segment ``[q, p]`` and the edges ``ea + t eab``."""
    d1 = p - q
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    best = np.inf
    for k in range(ea.shape[0]):
        d2 = eab[k]
        r = q - ea[k]
        e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
        f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
        if a <= TOL * TOL:
            s = 0.0
            t = min(max(f / e, 0.0), 1.0)
        else:
            c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
            bb = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            denom = a * e - bb * bb
            s = min(max((bb * f - c * e) / denom, 0.0), 1.0) if denom > TOL * TOL else 0.0
            t = (bb * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((bb - c) / a, 0.0), 1.0)
        dist2 = 0.0
        for i in range(3):
            diff = q[i] + s * d1[i] - ea[k, i] - t * d2[i]
            dist2 += diff * diff
        best = min(best, dist2)
    return math.sqrt(best)


@numba.njit(cache=True)
def rays_hit_sphere(x, dirs, c, r, best_t, best_i, idx):
    """Record ray entries into a ball where they beat ``best_t``."""
    o0 = x[0] - c[0]
    o1 = x[1] - c[1]
    o2 = x[2] - c[2]
    cc = o0 * o0 + o1 * o1 + o2 * o2 - r * r
    for k in range(dirs.shape[0]):
        bb = dirs[k, 0] * o0 + dirs[k, 1] * o1 + dirs[k, 2] * o2
        disc = bb * bb - cc
        if disc < 0.0:
            continue
        t = -bb - math.sqrt(disc)
        if t >= 0.0 and t < best_t[k]:
            best_t[k] = t
            best_i[k] = idx


@numba.njit(cache=True)
def rays_hit_halfspaces(x, dirs, A, b, c, r, best_t, best_i, idx):
    """Record ray entries into ``A y <= b``; rays missing the bounding ball are skipped."""
    o0 = x[0] - c[0]
    o1 = x[1] - c[1]
    o2 = x[2] - c[2]
    cc = o0 * o0 + o1 * o1 + o2 * o2 - r * r
    num = b - A @ x
    for k in range(dirs.shape[0]):
        bb = dirs[k, 0] * o0 + dirs[k, 1] * o1 + dirs[k, 2] * o2
        if bb * bb - cc < 0.0:
            continue
        t_in = 0.0
        t_out = np.inf
        ok = True
        for p in range(A.shape[0]):
            den = A[p, 0] * dirs[k, 0] + A[p, 1] * dirs[k, 1] + A[p, 2] * dirs[k, 2]
            if den == 0.0:
                if num[p] < 0.0:
                    ok = False
                    break
            elif den < 0.0:
                t_in = max(t_in, num[p] / den)
            else:
                t_out = min(t_out, num[p] / den)
            if t_in > t_out:
                ok = False
                break
        if ok and t_in > 0.0 and t_in < best_t[k]:
            best_t[k] = t_in
            best_i[k] = idx
