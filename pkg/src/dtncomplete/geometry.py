"""Planar polygon helpers shared by the phantom generator and the theory checks."""

import numpy as np


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def perimeter(poly) -> float:
    p = np.asarray(poly, dtype=float)
    return float(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).sum())


def side_lengths(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    return np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)


def interior_angles(poly) -> np.ndarray:
    """Interior angle at each vertex of a counterclockwise polygon, in (0, 2 pi)."""
    p = np.asarray(poly, dtype=float)
    e_in = p - np.roll(p, 1, axis=0)
    e_out = np.roll(p, -1, axis=0) - p
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.einsum("ij,ij->i", e_in, e_out)
    return np.pi - np.arctan2(cross, dot)


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c, eps):
    return (
        min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
    )


def segments_intersect(p1, p2, q1, q2, eps: float = 1e-14) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    if abs(d1) <= eps and _on_segment(q1, q2, p1, eps):
        return True
    if abs(d2) <= eps and _on_segment(q1, q2, p2, eps):
        return True
    if abs(d3) <= eps and _on_segment(p1, p2, q1, eps):
        return True
    if abs(d4) <= eps and _on_segment(p1, p2, q2, eps):
        return True
    return False


def is_simple(poly) -> bool:
    """True when the closed chain has distinct vertices and no self-intersection."""
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n < 3:
        return False
    if len(np.unique(p, axis=0)) != n:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # edges sharing a vertex only fail by folding back onto each other
                if j == i + 1:
                    a, m, b = p[i], p[j], p[(j + 1) % n]
                else:
                    a, m, b = p[n - 1], p[0], p[1]
                if abs(_orient(a, m, b)) <= 1e-14 and np.dot(m - a, b - m) < 0:
                    return False
                continue
            if segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]):
                return False
    return True


def point_segment_distance(pts, a, b) -> np.ndarray:
    """Euclidean distance from each point in ``pts`` to the closed segment [a, b]."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ d / dd, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[:, None] * d), axis=1)


def inside_convex(pts, poly, eps: float = 0.0) -> np.ndarray:
    """Point-in-convex-polygon test for a counterclockwise polygon (boundary counts as inside)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    e = q - p
    rel = pts[:, None, :] - p[None, :, :]
    cross = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
    return np.all(cross >= -eps, axis=1)


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW polygon ``clip``.

    Returns the intersection polygon (possibly empty, shape (0, 2)).
    """
    out = [np.asarray(v, dtype=float) for v in np.asarray(subject, dtype=float)]
    c = np.asarray(clip, dtype=float)
    n = len(c)
    for i in range(n):
        if not out:
            break
        a, b = c[i], c[(i + 1) % n]
        inp = out
        out = []
        s = inp[-1]
        s_in = _orient(a, b, s) >= 0
        for e in inp:
            e_in = _orient(a, b, e) >= 0
            if e_in:
                if not s_in:
                    out.append(_line_cross(s, e, a, b))
                out.append(e)
            elif s_in:
                out.append(_line_cross(s, e, a, b))
            s, s_in = e, e_in
    return np.array(out).reshape(-1, 2)


def _line_cross(s, e, a, b):
    ds = _orient(a, b, s)
    de = _orient(a, b, e)
    t = ds / (ds - de)
    return s + t * (e - s)


def intersection_area(p, q) -> float:
    """Area of the intersection of two convex CCW polygons."""
    inter = clip_convex(p, q)
    if len(inter) < 3:
        return 0.0
    return abs(signed_area(inter))


def symmetric_difference_area(p, q) -> float:
    """``|P delta Q|`` for convex CCW polygons."""
    return abs(signed_area(p)) + abs(signed_area(q)) - 2.0 * intersection_area(p, q)
