"""Linearized Tikhonov reconstruction of conductivity from a (completed) DtN matrix.

At the unit background the derivative of the discrete DtN map with respect to
the conductivity of element ``e`` is the element energy of the harmonic
extensions::

    d Lambda_ij / d gamma_e = int_e grad u_i . grad u_j

so one factorization and ``N_B`` solves give the whole sensitivity matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dtn_stack, check_positive
from .mesh_fem import TriMesh, harmonic_extensions
from .phantoms import rasterize

GAMMA_FLOOR = 0.1


def sensitivity(mesh: TriMesh, gamma=1.0) -> tuple[np.ndarray, np.ndarray]:
    """Sensitivity matrix at ``gamma`` (default: the unit background).

    Returns
    -------
    J : ndarray, shape (N_B * N_B, n_triangles)
        Row ``i * N_B + j`` holds ``d Lambda_ij / d gamma_e``.
    lam : ndarray, shape (N_B, N_B)
        The DtN matrix at ``gamma``.
    """
    lam, U = harmonic_extensions(mesh, gamma)
    G = mesh.gradients  # (n_tri, 3, 2)
    tri = mesh.triangles
    # gradient of every extension on every element: (n_tri, N_B, 2)
    grads = np.einsum("tkb,tkd->tbd", U[tri], G)
    J = np.einsum("tid,tjd,t->ijt", grads, grads, mesh.areas)
    n = mesh.n_boundary
    return J.reshape(n * n, -1), lam


def _symmetrize(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


class LinearizedReconstructor(BaseEstimator):
    """One-step Tikhonov difference imaging on a fixed mesh.

    Solves ``min ||J d - vec(Lambda_hat - Lambda_1)||^2 + lambda ||W^(1/2) d||^2``.
    ``prior="identity"`` takes ``W = I``; ``prior="noser"`` weights each element
    by its squared sensitivity column norm (normalized to mean 1), which keeps
    the weak-sensitivity interior from being shrunk harder than the boundary.

    ``fit`` builds the sensitivity matrix and its SVD, and, when validation data
    are supplied, picks the regularization weight from ``lambda_grid`` by the
    smallest mean relative error. ``predict`` maps raw DtN matrices to element
    conductivities ``max(1 + delta_gamma, floor)``.

    Parameters
    ----------
    mesh : TriMesh
    lambda_reg : float or None
        Absolute Tikhonov weight. ``None`` means ``lambda_rel * ||J||_2**2``.
    lambda_rel : float
    lambda_grid : sequence of float or None
        Relative weights (multiples of ``||J||_2**2``) searched when ``fit``
        receives validation data.
    floor : float
        Lower clip for the reconstructed conductivity.
    prior : {"noser", "identity"}
    """

    def __init__(self, mesh: TriMesh | None = None, lambda_reg: float | None = None, lambda_rel: float = 1e-3,
                 lambda_grid=None, floor: float = GAMMA_FLOOR, prior: str = "noser"):
        self.mesh = mesh
        self.prior = prior
        self.lambda_reg = lambda_reg
        self.lambda_rel = lambda_rel
        self.lambda_grid = lambda_grid
        self.floor = floor

    def fit(self, X=None, y=None):
        """Precompute the linearization; optionally tune lambda on ``(X, y)``.

        ``X`` is a stack of raw DtN matrices, ``y`` the matching element
        conductivities, shape ``(n, n_triangles)``.
        """
        if self.mesh is None:
            raise ValueError("a mesh is required")
        J, lam = sensitivity(self.mesh)
        self.background_ = lam
        if self.prior == "identity":
            w = np.ones(J.shape[1])
        elif self.prior == "noser":
            w = np.sum(J**2, axis=0)
            w = w / w.mean()
        else:
            raise ValueError(f"unknown prior {self.prior!r}")
        self.weights_ = w
        self.U_, self.s_, self.Vt_ = np.linalg.svd(J / np.sqrt(w), full_matrices=False)
        self.J_norm2_ = float(self.s_[0] ** 2)
        if self.lambda_reg is not None:
            self.lambda_ = check_positive(self.lambda_reg, "lambda_reg")
        else:
            self.lambda_ = check_positive(self.lambda_rel, "lambda_rel") * self.J_norm2_
        if X is not None and y is not None:
            grid = self.lambda_grid if self.lambda_grid is not None else np.logspace(-6, 0, 13)
            y = np.asarray(y, float)
            scores = []
            for rel in grid:
                pred = self._solve(X, rel * self.J_norm2_)
                scores.append(np.mean(np.linalg.norm(pred - y, axis=1) / np.linalg.norm(y, axis=1)))
            self.lambda_scores_ = np.asarray(scores)
            self.lambda_ = float(grid[int(np.argmin(scores))]) * self.J_norm2_
        return self

    def delta(self, X, lambda_=None) -> np.ndarray:
        """Unclipped perturbation ``delta_gamma`` for each raw DtN matrix."""
        check_is_fitted(self, "Vt_")
        lam = self.lambda_ if lambda_ is None else check_positive(lambda_, "lambda")
        X = check_dtn_stack(X)
        if X.shape[-1] != self.background_.shape[0]:
            raise ValueError(f"expected {self.background_.shape[0]} boundary nodes, got {X.shape[-1]}")
        R = (_symmetrize(X) - self.background_).reshape(len(X), -1)
        filt = self.s_ / (self.s_**2 + lam)
        return (((R @ self.U_) * filt) @ self.Vt_) / np.sqrt(self.weights_)

    def _solve(self, X, lambda_):
        return np.maximum(1.0 + self.delta(X, lambda_), self.floor)

    def predict(self, X) -> np.ndarray:
        """Element conductivities, shape ``(n, n_triangles)``."""
        return self._solve(X, None)

    def predict_images(self, X, size: int = 128) -> np.ndarray:
        return np.stack([rasterize(self.mesh, g, size) for g in self.predict(X)])


def reconstruct(dtn_hat, mesh: TriMesh, lambda_reg: float, prior: str = "noser") -> np.ndarray:
    """Single-matrix convenience wrapper: element conductivity from a raw DtN estimate."""
    check_positive(lambda_reg, "lambda_reg")
    return LinearizedReconstructor(mesh, lambda_reg=lambda_reg, prior=prior).fit().predict(dtn_hat)[0]
