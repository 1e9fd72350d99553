"""Conductivity phantoms: random disk inclusions, polygon inclusions, grid rasterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from matplotlib.tri import LinearTriInterpolator, Triangulation

from . import geometry
from ._rng import as_generator
from .mesh_fem import TriMesh, check_conductivity

RADIUS_RANGE = (0.2, 0.4)
CONTRAST_RANGE = (2.0, 8.0)


class InfeasibleDrawError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


@dataclass(frozen=True, eq=False)
class DiskPhantomSpec:
    """Union of disjoint circular inclusions on a unit background."""

    centers: np.ndarray
    radii: np.ndarray
    contrasts: np.ndarray

    @property
    def n_inclusions(self) -> int:
        return len(self.radii)

    @classmethod
    def empty(cls) -> "DiskPhantomSpec":
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0))

    @classmethod
    def single(cls, center=(0.0, 0.0), radius=0.3, contrast=5.0) -> "DiskPhantomSpec":
        """One inclusion, bypassing the sampling law (test fixture)."""
        return cls(np.asarray([center], float), np.asarray([radius], float), np.asarray([contrast], float))

    def is_valid(self) -> bool:
        c, r = self.centers, self.radii
        if np.any(1.0 - np.linalg.norm(c, axis=1) <= r):
            return False
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                if np.linalg.norm(c[i] - c[j]) <= r[i] + r[j]:
                    return False
        return True

    def evaluate(self, pts) -> np.ndarray:
        """``1 + sum_i (c_i - 1) 1{|x - x_i| <= r_i}`` at the given points."""
        pts = np.atleast_2d(np.asarray(pts, float))
        out = np.ones(len(pts))
        for x, r, c in zip(self.centers, self.radii, self.contrasts):
            inside = np.sum((pts - x) ** 2, axis=1) <= r * r
            out += (c - 1.0) * inside
        return out

    def to_arrays(self) -> dict:
        return {"centers": self.centers, "radii": self.radii, "contrasts": self.contrasts}


def sample_disks(rng_seed, n_inclusions: int, *, batch: int = 64, max_attempts: int = 10**5) -> DiskPhantomSpec:
    """Draw a Disks-distribution phantom.

    Radii ``U[0.2, 0.4]`` and contrasts ``U[2, 8]`` are drawn first; centers are
    then drawn uniformly on the disk and rejected until every inclusion is
    contained and the inclusions are pairwise disjoint. Centers are placed
    largest-first, one inclusion at a time, restarting the placement when an
    inclusion cannot be placed; radii are redrawn only when placement keeps
    failing. ``max_attempts`` counts proposed centers.
    """
    n = int(n_inclusions)
    if n not in (2, 3, 4, 5):
        raise ValueError(f"n_inclusions must be in {{2,3,4,5}}, got {n}")
    rng = as_generator(rng_seed)
    attempts = 0
    while attempts < max_attempts:
        radii = rng.uniform(*RADIUS_RANGE, size=n)
        contrasts = rng.uniform(*CONTRAST_RANGE, size=n)
        order = np.argsort(-radii, kind="stable")
        for _ in range(100):
            centers = np.zeros((n, 2))
            placed = True
            for k, i in enumerate(order):
                rad = np.sqrt(rng.uniform(size=batch))
                th = rng.uniform(0.0, 2 * np.pi, size=batch)
                cand = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
                attempts += batch
                ok = 1.0 - rad > radii[i]
                for j in order[:k]:
                    ok &= np.linalg.norm(cand - centers[j], axis=1) > radii[i] + radii[j]
                hit = np.flatnonzero(ok)
                if hit.size == 0:
                    placed = False
                    break
                centers[i] = cand[hit[0]]
            if placed:
                return DiskPhantomSpec(centers, radii, contrasts)
            if attempts >= max_attempts:
                break
    raise InfeasibleDrawError(f"no admissible {n}-disk phantom within {max_attempts} proposals")


def to_conductivity(spec: DiskPhantomSpec, mesh: TriMesh) -> np.ndarray:
    """Per-element conductivity, evaluated at element centroids (closed disks)."""
    return spec.evaluate(mesh.centroids)


# ---------------------------------------------------------------------------
# polygon inclusions

DEFAULT_POLYGON_PARAMS = {"d0": 0.2, "d1": 0.3, "beta0": np.pi / 6, "kappa": 4.0}


@dataclass(frozen=True, eq=False)
class PolygonSpec:
    vertices: np.ndarray
    kappa: float = DEFAULT_POLYGON_PARAMS["kappa"]
    d0: float = DEFAULT_POLYGON_PARAMS["d0"]
    d1: float = DEFAULT_POLYGON_PARAMS["d1"]
    beta0: float = DEFAULT_POLYGON_PARAMS["beta0"]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def with_vertices(self, vertices) -> "PolygonSpec":
        return PolygonSpec(np.asarray(vertices, float), self.kappa, self.d0, self.d1, self.beta0)

    @property
    def flat(self) -> np.ndarray:
        """Vertex list as a point of R^{2 n_v}."""
        return np.asarray(self.vertices, float).ravel()


def polygon_admissible(spec: PolygonSpec, relaxed: bool = False) -> tuple[bool, str | None]:
    """Check the admissible-class conditions.

    Returns ``(ok, reason)``; ``reason`` names the first violated condition
    (``"not-simple"``, ``"not-ccw"``, ``"A1"``, ``"A2"``, ``"A3"``) or is None.
    With ``relaxed=True`` the halved, strict-inequality conditions are used.
    """
    v = np.asarray(spec.vertices, float)
    if len(v) < 3 or not geometry.is_simple(v):
        return False, "not-simple"
    if geometry.signed_area(v) <= 0:
        return False, "not-ccw"
    # the farthest point of a polygon from the origin is one of its vertices
    rmax = np.max(np.linalg.norm(v, axis=1))
    dist = 1.0 - rmax
    sides = geometry.side_lengths(v)
    angles = geometry.interior_angles(v)
    if relaxed:
        if not (rmax < 1.0 and dist > spec.d0 / 2):
            return False, "A1"
        if not np.all(sides > spec.d1 / 2):
            return False, "A2"
        if not np.all((angles > spec.beta0 / 2) & (angles < np.pi - spec.beta0 / 2)):
            return False, "A3"
    else:
        if not (rmax < 1.0 and dist >= spec.d0):
            return False, "A1"
        if not np.all(sides >= spec.d1):
            return False, "A2"
        if not np.all((angles >= spec.beta0) & (angles <= np.pi - spec.beta0)):
            return False, "A3"
    return True, None


def regular_polygon(n_v: int, circumradius: float = 0.5, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    k = np.arange(n_v)
    th = phase + 2 * np.pi * k / n_v
    return np.column_stack([center[0] + circumradius * np.cos(th), center[1] + circumradius * np.sin(th)])


def sample_admissible_polygon(rng_seed, n_v: int, relaxed: bool = False, max_attempts: int = 10**5, **params) -> PolygonSpec:
    """Rejection-sample a polygon from the (relaxed) admissible class."""
    rng = as_generator(rng_seed)
    p = {**DEFAULT_POLYGON_PARAMS, **params}
    for _ in range(max_attempts):
        rho = rng.uniform(0.2, 0.6)
        rad = np.sqrt(rng.uniform()) * (0.8 - rho)
        phi = rng.uniform(0, 2 * np.pi)
        center = rad * np.array([np.cos(phi), np.sin(phi)])
        jitter = rng.uniform(-0.35, 0.35, size=n_v) * 2 * np.pi / n_v
        th = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.arange(n_v) / n_v + jitter
        r = rho * rng.uniform(0.8, 1.2, size=n_v)
        verts = center + np.column_stack([r * np.cos(th), r * np.sin(th)])
        spec = PolygonSpec(verts, **p)
        if polygon_admissible(spec, relaxed=relaxed)[0]:
            return spec
    raise InfeasibleDrawError("no admissible polygon found")


def polygon_conductivity(spec: PolygonSpec, mesh: TriMesh, mode: str = "fraction") -> np.ndarray:
    """``1 + (kappa - 1) chi_P`` on mesh elements.

    ``mode="fraction"`` uses the exact area fraction of each element covered by
    the (convex) polygon, which makes the element field Lipschitz in the vertex
    coordinates; ``mode="centroid"`` samples the indicator at centroids.
    """
    v = np.asarray(spec.vertices, float)
    if mode == "centroid":
        chi = geometry.inside_convex(mesh.centroids, v).astype(float)
    elif mode == "fraction":
        tri_pts = mesh.vertices[mesh.triangles]
        inside = geometry.inside_convex(tri_pts.reshape(-1, 2), v).reshape(-1, 3)
        chi = np.where(inside.all(axis=1), 1.0, 0.0)
        lo, hi = v.min(axis=0), v.max(axis=0)
        tlo, thi = tri_pts.min(axis=1), tri_pts.max(axis=1)
        overlap = np.all((thi >= lo) & (tlo <= hi), axis=1) & ~inside.all(axis=1)
        areas = mesh.areas
        for e in np.flatnonzero(overlap):
            chi[e] = geometry.intersection_area(tri_pts[e], v) / areas[e]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return 1.0 + (spec.kappa - 1.0) * chi


# ---------------------------------------------------------------------------
# rasterization


def grid_coordinates(size: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates; ``X[i, j] = x_j`` and ``Y[i, j] = y_i`` on [-1, 1]."""
    t = np.linspace(-1.0, 1.0, size)
    return np.meshgrid(t, t)


def disk_grid_mask(size: int = 128) -> np.ndarray:
    X, Y = grid_coordinates(size)
    return X**2 + Y**2 <= 1.0


def nodal_average(mesh: TriMesh, gamma) -> np.ndarray:
    """Area-weighted average of element values onto nodes."""
    w = mesh.areas
    num = np.zeros(mesh.n_nodes)
    den = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(num, mesh.triangles[:, k], w * gamma)
        np.add.at(den, mesh.triangles[:, k], w)
    return num / den


def rasterize(mesh: TriMesh, gamma, size: int = 128) -> np.ndarray:
    """Piecewise-linear interpolation of an element field onto a square grid.

    Element values are averaged onto nodes and interpolated barycentrically
    inside the containing triangle. Grid points in the thin caps between the
    circle and the inscribed polygon are pulled radially into the polygon.
    Points outside the closed unit disk are exactly 0.
    """
    gamma = check_conductivity(mesh, gamma)
    nodal = nodal_average(mesh, gamma)
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    interp = LinearTriInterpolator(tri, nodal)
    X, Y = grid_coordinates(size)
    inside = X**2 + Y**2 <= 1.0
    px, py = X[inside], Y[inside]
    vals = np.ma.filled(interp(px, py), np.nan)
    miss = np.isnan(vals)
    if miss.any():
        shrink = np.cos(np.pi / mesh.n_boundary) * (1.0 - 1e-9)
        vals[miss] = np.ma.filled(interp(px[miss] * shrink, py[miss] * shrink), np.nan)
    img = np.zeros((size, size))
    img[inside] = vals
    return img
