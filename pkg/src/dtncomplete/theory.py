"""Numerical checks of the geometric and stability estimates for polygonal inclusions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial.distance import cdist

from . import geometry
from ._rng import as_generator
from .mesh_fem import TriMesh, dtn_matrix
from .phantoms import PolygonSpec, polygon_admissible, polygon_conductivity, sample_admissible_polygon

DIAM_OMEGA = 2.0
SLACK = 1e-9


def poly_norm(v, w=None) -> float:
    """``max_i |v_i - w_i|`` over vertices (Euclidean norm per vertex)."""
    v = np.asarray(v, float).reshape(-1, 2)
    d = v if w is None else v - np.asarray(w, float).reshape(-1, 2)
    return float(np.max(np.linalg.norm(d, axis=1)))


# ---------------------------------------------------------------------------
# Hausdorff distance between closed polylines


def _seg_dist_along(a0, a1, b0, b1, s):
    pts = a0 + np.outer(np.atleast_1d(s), a1 - a0)
    return geometry.point_segment_distance(pts, b0, b1)


def _directed_hausdorff(P, Q) -> float:
    """``sup_{x in dP} dist(x, dQ)`` for closed polylines, exactly.

    Along one edge of ``P`` the distance to each edge of ``Q`` is convex, so the
    lower envelope of these distances attains its maximum at an edge endpoint or
    where two of the convex pieces cross. Crossings are bracketed on a grid and
    refined by Brent's method.
    """
    nP, nQ = len(P), len(Q)
    qa, qb = Q, np.roll(Q, -1, axis=0)
    grid = np.linspace(0.0, 1.0, 65)
    best = 0.0
    for i in range(nP):
        a0, a1 = P[i], P[(i + 1) % nP]
        F = np.stack([_seg_dist_along(a0, a1, qa[j], qb[j], grid) for j in range(nQ)])
        cand = [0.0, 1.0]
        for j in range(nQ):
            for k in range(j + 1, nQ):
                h = F[j] - F[k]
                for m in np.flatnonzero(np.sign(h[:-1]) * np.sign(h[1:]) < 0):
                    f = lambda s: (_seg_dist_along(a0, a1, qa[j], qb[j], s) - _seg_dist_along(a0, a1, qa[k], qb[k], s))[0]
                    lo, hi = grid[m], grid[m + 1]
                    if f(lo) * f(hi) < 0:
                        cand.append(brentq(f, lo, hi, xtol=1e-14))
                    else:  # sign change lost to rounding; the crossing sits at a grid point
                        cand.extend([lo, hi])
                cand.extend(grid[np.flatnonzero(h == 0)].tolist())
        cand = np.asarray(cand)
        pts = a0 + np.outer(cand, a1 - a0)
        env = np.min([geometry.point_segment_distance(pts, qa[j], qb[j]) for j in range(nQ)], axis=0)
        best = max(best, float(env.max()))
    return best


def hausdorff_boundary(v, w) -> float:
    """Hausdorff distance between the boundaries of two polygons."""
    P = np.asarray(v, float).reshape(-1, 2)
    Q = np.asarray(w, float).reshape(-1, 2)
    return max(_directed_hausdorff(P, Q), _directed_hausdorff(Q, P))


@dataclass(frozen=True)
class BoundCheck:
    value: float
    bound: float
    passed: bool


def hausdorff_poly_bound(v, w) -> BoundCheck:
    """Compare ``d_H(dP(v), dP(w))`` with ``||v - w||_poly``."""
    v = np.asarray(v, float).reshape(-1, 2)
    w = np.asarray(w, float).reshape(-1, 2)
    if v.shape != w.shape:
        raise ValueError("vertex lists must have the same length")
    if not (geometry.is_simple(v) and geometry.is_simple(w)):
        raise ValueError("polygons must be simple")
    d = hausdorff_boundary(v, w)
    b = poly_norm(v, w)
    return BoundCheck(d, b, d <= b + SLACK)


def symdiff_constant(n_v: int, diam: float = DIAM_OMEGA) -> float:
    return 2.0 * n_v * (np.pi + 1.0) * diam


def symdiff_bound(v, w, diam: float = DIAM_OMEGA) -> BoundCheck:
    """Compare ``|P(v) delta P(w)|`` with ``2 n_v (pi + 1) diam(Omega) ||v - w||_poly``.

    Areas are exact for convex polygons (polygon clipping).
    """
    v = np.asarray(v, float).reshape(-1, 2)
    w = np.asarray(w, float).reshape(-1, 2)
    for p in (v, w):
        if not geometry.is_simple(p) or np.any(geometry.interior_angles(p) >= np.pi) or geometry.signed_area(p) <= 0:
            raise ValueError("polygons must be convex and counterclockwise")
    area = geometry.symmetric_difference_area(v, w)
    bound = symdiff_constant(len(v), diam) * poly_norm(v, w)
    return BoundCheck(area, bound, area <= bound + SLACK)


def perturb_polygon(spec: PolygonSpec, delta: float, rng, relaxed: bool = True, one_vertex: bool = False, max_tries: int = 1000):
    """Random perturbation with ``||v - w||_poly = delta`` that stays in the (relaxed) class."""
    rng = as_generator(rng)
    v = np.asarray(spec.vertices, float)
    for _ in range(max_tries):
        ang = rng.uniform(0, 2 * np.pi, size=len(v))
        r = np.full(len(v), delta) if one_vertex else rng.uniform(0, delta, size=len(v))
        if one_vertex:
            keep = np.arange(len(v)) != rng.integers(len(v))
            r[keep] = 0.0
        else:
            r[rng.integers(len(v))] = delta
        w = v + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if polygon_admissible(spec.with_vertices(w), relaxed=relaxed)[0]:
            return w
    raise RuntimeError("no admissible perturbation found")


def bound_sweep(kind: str, n_instances: int = 100, rng=None, n_v_choices=(3, 4, 5, 6), delta_range=(1e-3, 5e-2)):
    """Property sweep over random admissible polygons and perturbations.

    ``kind`` is ``"hausdorff"`` or ``"symdiff"``. Returns a list of
    ``(n_v, delta, value, bound, passed)`` rows.
    """
    rng = as_generator(rng)
    check = {"hausdorff": hausdorff_poly_bound, "symdiff": symdiff_bound}[kind]
    rows = []
    for i in range(n_instances):
        n_v = int(rng.choice(n_v_choices))
        spec = sample_admissible_polygon(rng, n_v)
        delta = float(rng.uniform(*delta_range))
        w = perturb_polygon(spec, delta, rng, one_vertex=(i % 2 == 0))
        res = check(spec.vertices, w)
        rows.append((n_v, delta, res.value, res.bound, res.passed))
    return rows


# ---------------------------------------------------------------------------
# discretized measurement map


def measurement_map(mesh: TriMesh, spec: PolygonSpec) -> np.ndarray:
    """``F_N(gamma_P) = vec(Lambda / h) / sqrt(N)`` with ``h = 2 pi / N``.

    Dividing the nodal DtN matrix by the boundary spacing expresses it in an
    (approximately) L2-orthonormal boundary basis, so the Euclidean norm of the
    vector is a Hilbert-Schmidt norm that is comparable across resolutions.
    """
    n = mesh.n_boundary
    h = 2.0 * np.pi / n
    lam = dtn_matrix(mesh, polygon_conductivity(spec, mesh, mode="fraction"))
    return (lam / h).ravel() / np.sqrt(n)


@dataclass
class LipschitzReport:
    max_ratio: float
    ratios: np.ndarray
    skipped: int
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0))


def empirical_lipschitz(mesh: TriMesh, base: PolygonSpec, n_probes: int = 50, step: float = 1e-3, rng=None) -> LipschitzReport:
    """Largest finite-difference quotient ``||F_N(v') - F_N(v)||_2 / ||v' - v||_2``.

    Probes ``v' = v + step * u`` use random unit directions ``u``; probes that leave
    the relaxed admissible class are skipped and counted.
    """
    if not polygon_admissible(base)[0]:
        raise ValueError("base polygon is not admissible")
    if step <= 0:
        raise ValueError("step must be positive")
    rng = as_generator(rng)
    f0 = measurement_map(mesh, base)
    v = base.flat
    ratios, steps, skipped = [], [], 0
    for _ in range(n_probes):
        u = rng.standard_normal(v.size)
        u /= np.linalg.norm(u)
        w = v + step * u
        spec = base.with_vertices(w.reshape(-1, 2))
        if not polygon_admissible(spec, relaxed=True)[0]:
            skipped += 1
            continue
        dv = np.linalg.norm(w - v)
        ratios.append(np.linalg.norm(measurement_map(mesh, spec) - f0) / dv)
        steps.append(dv)
    ratios = np.asarray(ratios)
    return LipschitzReport(float(ratios.max()) if ratios.size else float("nan"), ratios, skipped, np.asarray(steps))


# ---------------------------------------------------------------------------
# covering numbers


def greedy_net_sizes(points, eps_list) -> np.ndarray:
    """Size of a greedy ``eps``-net of ``points`` for every ``eps``.

    A point opens a new center when it is farther than ``eps`` from every
    existing center; the centers then cover the set at radius ``eps``.
    """
    X = np.asarray(points, float)
    D = cdist(X, X)
    out = []
    for eps in eps_list:
        covered = np.zeros(len(X), bool)
        count = 0
        for i in range(len(X)):
            if covered[i]:
                continue
            count += 1
            covered |= D[i] <= eps
        out.append(count)
    return np.asarray(out)


def fit_covering_slope(eps_list, counts, n_points: int, lo_frac: float = 0.02, hi_frac: float = 0.5):
    """Least-squares slope of ``log N`` against ``log(1/eps)`` on the unsaturated range.

    Only scales with ``lo_frac * n < N < hi_frac * n`` enter the fit (small counts
    are dominated by the set's diameter, large ones by sample exhaustion).
    Returns ``(slope, mask_used)``; the slope is NaN with fewer than 3 points.
    """
    eps = np.asarray(eps_list, float)
    counts = np.asarray(counts, float)
    use = (counts > max(1.0, lo_frac * n_points)) & (counts < hi_frac * n_points)
    if use.sum() < 3:
        return float("nan"), use
    slope = np.polyfit(np.log(1.0 / eps[use]), np.log(counts[use]), 1)[0]
    return float(slope), use


@dataclass
class CoveringReport:
    eps: np.ndarray
    counts: np.ndarray
    slope: float
    used: np.ndarray
    n_points: int
    intrinsic_dim: int


def covering_estimate(points, eps_list=None, intrinsic_dim: int | None = None) -> CoveringReport:
    """Greedy covering counts over a sample of the measurement set, with fitted slope."""
    X = np.asarray(points, float)
    if eps_list is None:
        D = cdist(X, X)
        top = D.max()
        pos = D[D > 0]
        eps_list = np.geomspace(pos.min(), top, 40)
    counts = greedy_net_sizes(X, eps_list)
    slope, used = fit_covering_slope(eps_list, counts, len(X))
    return CoveringReport(np.asarray(eps_list), counts, slope, used, len(X), intrinsic_dim or 0)


def polygon_measurement_sample(mesh: TriMesh, n_v: int, n_samples: int, rng=None) -> np.ndarray:
    """``F_N`` images of admissible random polygons, shape ``(n_samples, N_B**2)``."""
    rng = as_generator(rng)
    return np.stack([measurement_map(mesh, sample_admissible_polygon(rng, n_v)) for _ in range(n_samples)])


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
