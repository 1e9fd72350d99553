"""Disk triangulation, P1 stiffness assembly and the discrete Dirichlet-to-Neumann map.

The DtN matrix is the Schur complement of the stiffness matrix onto the boundary
nodes::

    Lambda = K_BB - K_BI K_II^{-1} K_IB

computed from a single factorization of the interior block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _io


class FactorizationError(RuntimeError):
    """The interior stiffness block is not symmetric positive definite."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangulation of the unit disk.

    Attributes
    ----------
    vertices : ndarray, shape (n_nodes, 2)
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices, counterclockwise.
    boundary_idx : ndarray
        Boundary node indices in counterclockwise order around the circle.
    interior_idx : ndarray
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_idx: np.ndarray
    interior_idx: np.ndarray

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_idx)

    N_B = n_boundary

    @property
    def n_interior(self) -> int:
        return len(self.interior_idx)

    N_I = n_interior

    @property
    def n_nodes(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Constant gradients of the three local hat functions, shape (n_tri, 3, 2)."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        two_a = (2.0 * self.signed_areas)[:, None]
        return np.stack([b / two_a, c / two_a], axis=2)

    @property
    def boundary_angles(self) -> np.ndarray:
        bx, by = self.vertices[self.boundary_idx].T
        return np.arctan2(by, bx)

    def check(self, tol: float = 1e-12) -> None:
        """Raise ``ValueError`` if any structural invariant is violated."""
        r = np.linalg.norm(self.vertices[self.boundary_idx], axis=1)
        if np.max(np.abs(r - 1.0)) > tol:
            raise ValueError("boundary vertex off the unit circle")
        both = np.intersect1d(self.boundary_idx, self.interior_idx)
        if both.size:
            raise ValueError("interior and boundary index sets overlap")
        cover = np.union1d(self.boundary_idx, self.interior_idx)
        if cover.size != self.n_nodes:
            raise ValueError("index sets do not cover all vertices")
        if np.any(self.signed_areas <= 0):
            raise ValueError("non-positive triangle area")
        ang = np.unwrap(self.boundary_angles)
        steps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
        if np.any(steps <= 0) or not np.isclose(steps.sum(), 2 * np.pi):
            raise ValueError("boundary_idx is not a single counterclockwise cycle")

    def save(self, path) -> None:
        _io.save(
            path,
            "trimesh",
            {
                "vertices": self.vertices.astype("<f8"),
                "triangles": self.triangles.astype("<u4"),
                "boundary_idx": self.boundary_idx.astype("<u4"),
                "interior_idx": self.interior_idx.astype("<u4"),
            },
            meta={"n_boundary": self.n_boundary, "n_interior": self.n_interior},
        )

    @classmethod
    def load(cls, path) -> "TriMesh":
        arrays, _ = _io.load(path, kind="trimesh")
        return cls(
            vertices=arrays["vertices"].astype(float),
            triangles=arrays["triangles"].astype(np.int64),
            boundary_idx=arrays["boundary_idx"].astype(np.int64),
            interior_idx=arrays["interior_idx"].astype(np.int64),
        )


def _stitch(inner_ids, inner_ang, outer_ids, outer_ang):
    """Fan-triangulate the annulus between two rings by merging their angles."""
    m, n = len(inner_ids), len(outer_ids)
    b0 = outer_ang[0]
    # start the inner ring at the vertex angularly closest to outer[0]
    d = np.angle(np.exp(1j * (inner_ang - b0)))
    i0 = int(np.argmin(np.abs(d)))
    order = np.roll(np.arange(m), -i0)
    a = b0 + np.unwrap(d[order]) if m > 1 else b0 + d[order]
    a = np.append(a, a[0] + 2 * np.pi)
    ia = np.append(inner_ids[order], inner_ids[order[0]])
    b = np.append(b0 + np.mod(outer_ang - b0, 2 * np.pi), b0 + 2 * np.pi)
    ib = np.append(outer_ids, outer_ids[0])
    tris = []
    i = j = 0
    while i < m or j < n:
        if j == n or (i < m and a[i + 1] <= b[j + 1]):
            tris.append((ia[i], ia[i + 1], ib[j]))
            i += 1
        else:
            tris.append((ia[i], ib[j], ib[j + 1]))
            j += 1
    return tris


def build_disk_mesh(n_boundary: int, n_rings: int) -> TriMesh:
    """Concentric-ring triangulation of the unit disk.

    Ring ``k`` sits at radius ``k / n_rings`` and carries about
    ``n_boundary * k / n_rings`` nodes; the outer ring carries exactly
    ``n_boundary`` nodes at angles ``2 pi k / n_boundary``. Adjacent rings are
    stitched by an angular merge.

    The triangle count is ``2 * n_nodes - n_boundary - 2`` (Euler), so
    ``build_disk_mesh(128, 22)`` gives 128 boundary nodes, 1345 interior nodes
    and 2816 triangles.
    """
    n_boundary = int(n_boundary)
    n_rings = int(n_rings)
    if n_boundary < 8:
        raise ValueError(f"n_boundary must be >= 8, got {n_boundary}")
    if n_rings < 2:
        raise ValueError(f"n_rings must be >= 2, got {n_rings}")

    verts = [np.zeros((1, 2))]
    rings = [(np.array([0]), np.array([0.0]))]
    nxt = 1
    for k in range(1, n_rings + 1):
        r = k / n_rings
        if k == n_rings:
            cnt = n_boundary
            ang = 2 * np.pi * np.arange(cnt) / cnt
        else:
            cnt = max(3, int(round(n_boundary * r)))
            shift = 0.5 * ((n_rings - k) % 2)
            ang = 2 * np.pi * (np.arange(cnt) + shift) / cnt
        pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if k == n_rings:
            # exact unit radius
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        verts.append(pts)
        rings.append((np.arange(nxt, nxt + cnt), ang))
        nxt += cnt
    vertices = np.vstack(verts)

    tris = []
    c_id = rings[0][0][0]
    ids1, _ = rings[1]
    for j in range(len(ids1)):
        tris.append((c_id, ids1[j], ids1[(j + 1) % len(ids1)]))
    for k in range(1, n_rings):
        tris.extend(_stitch(rings[k][0], rings[k][1], rings[k + 1][0], rings[k + 1][1]))
    triangles = np.asarray(tris, dtype=np.int64)

    p = vertices[triangles]
    s = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    flip = s < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    boundary_idx = rings[-1][0]
    interior_idx = np.arange(0, boundary_idx[0])
    mesh = TriMesh(vertices, triangles, boundary_idx, interior_idx)
    mesh.check()
    return mesh


def paper_scale_mesh() -> TriMesh:
    """128 boundary nodes with about 1.3k interior nodes (the reported resolution class)."""
    return build_disk_mesh(128, 22)


def default_rings(n_boundary: int) -> int:
    """Ring count giving roughly equilateral elements for a given boundary resolution."""
    return max(2, int(round(n_boundary / 5.8)))


def check_conductivity(mesh: TriMesh, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim == 0:
        gamma = np.full(mesh.n_triangles, float(gamma))
    if gamma.shape != (mesh.n_triangles,):
        raise ValueError(
            f"conductivity needs one value per triangle ({mesh.n_triangles}), got shape {gamma.shape}"
        )
    if not np.all(np.isfinite(gamma)):
        raise ValueError("conductivity has non-finite entries")
    if np.any(gamma <= 0):
        raise ValueError("conductivity must be strictly positive")
    return gamma


def element_matrices(mesh: TriMesh, gamma) -> np.ndarray:
    """Local P1 stiffness matrices ``gamma_e * area_e * grad(phi_i) . grad(phi_j)``."""
    g = mesh.gradients
    return (gamma * mesh.areas)[:, None, None] * np.einsum("eik,ejk->eij", g, g)


@dataclass(eq=False)
class StiffnessMatrix:
    """Global stiffness matrix with interior/boundary block views."""

    K: sp.csr_matrix
    interior_idx: np.ndarray
    boundary_idx: np.ndarray
    _blocks: dict = field(default_factory=dict, repr=False)

    def _block(self, a, b):
        key = (a, b)
        if key not in self._blocks:
            rows = self.interior_idx if a == "I" else self.boundary_idx
            cols = self.interior_idx if b == "I" else self.boundary_idx
            self._blocks[key] = self.K[rows][:, cols].tocsc()
        return self._blocks[key]

    @property
    def K_II(self):
        return self._block("I", "I")

    @property
    def K_IB(self):
        return self._block("I", "B")

    @property
    def K_BI(self):
        return self._block("B", "I")

    @property
    def K_BB(self):
        return self._block("B", "B")


def assemble_stiffness(mesh: TriMesh, gamma) -> StiffnessMatrix:
    gamma = check_conductivity(mesh, gamma)
    ke = element_matrices(mesh, gamma)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return StiffnessMatrix(K, mesh.interior_idx, mesh.boundary_idx)


class InteriorFactor:
    """Symmetric sparse factorization of ``K_II``.

    SuperLU is run with a symmetric fill-reducing ordering and no pivoting,
    which is an LDL^T factorization in disguise; a non-positive pivot means the
    block is not SPD. The object is read-only after construction and may be
    shared between workers.
    """

    def __init__(self, K_II):
        try:
            self._lu = spla.splu(
                sp.csc_matrix(K_II),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise FactorizationError(f"interior block is singular: {exc}") from exc
        piv = self._lu.U.diagonal()
        if not np.all(np.isfinite(piv)) or np.any(piv <= 0):
            raise FactorizationError("interior block is not positive definite")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=float))


def factorize(stiff: StiffnessMatrix) -> InteriorFactor:
    return InteriorFactor(stiff.K_II)


def _schur(stiff, factor):
    KIB = stiff.K_IB.toarray()
    X = factor.solve(KIB)
    lam = stiff.K_BB.toarray() - stiff.K_BI @ X
    return lam, X


def dtn_matrix(mesh: TriMesh, gamma, stiffness: StiffnessMatrix | None = None) -> np.ndarray:
    """Discrete DtN matrix (raw), shape ``(N_B, N_B)``.

    Column ``k`` is the current induced by the Dirichlet pattern ``e_k``.
    """
    stiff = stiffness if stiffness is not None else assemble_stiffness(mesh, gamma)
    lam, _ = _schur(stiff, factorize(stiff))
    return lam


def harmonic_extensions(mesh: TriMesh, gamma) -> tuple[np.ndarray, np.ndarray]:
    """DtN matrix together with the nodal extensions of every boundary basis vector.

    Returns
    -------
    lam : ndarray, shape (N_B, N_B)
    U : ndarray, shape (n_nodes, N_B)
        ``U[:, k]`` is the discrete solution with boundary data ``e_k``.
    """
    stiff = assemble_stiffness(mesh, gamma)
    lam, X = _schur(stiff, factorize(stiff))
    U = np.zeros((mesh.n_nodes, mesh.n_boundary))
    U[mesh.interior_idx] = -X
    U[mesh.boundary_idx, np.arange(mesh.n_boundary)] = 1.0
    return lam, U


def solve_dirichlet(mesh: TriMesh, gamma, f) -> np.ndarray:
    """Nodal solution with boundary values ``f`` (ordered like ``boundary_idx``)."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.n_boundary:
        raise ValueError(f"boundary data must have length {mesh.n_boundary}, got {f.shape[0]}")
    stiff = assemble_stiffness(mesh, gamma)
    factor = factorize(stiff)
    u = np.zeros((mesh.n_nodes,) + f.shape[1:])
    u[mesh.boundary_idx] = f
    u[mesh.interior_idx] = -factor.solve(stiff.K_IB @ f)
    return u


def boundary_currents(mesh: TriMesh, gamma, u) -> np.ndarray:
    """``g_j = a(u, phi_j)`` for boundary nodes ``j``, by direct element assembly."""
    gamma = check_conductivity(mesh, gamma)
    ke = element_matrices(mesh, gamma)
    u = np.asarray(u, dtype=float)
    local = np.einsum("eij,ej...->ei...", ke, u[mesh.triangles])
    g = np.zeros((mesh.n_nodes,) + u.shape[1:])
    np.add.at(g, mesh.triangles.ravel(), local.reshape((-1,) + u.shape[1:]))
    return g[mesh.boundary_idx]
