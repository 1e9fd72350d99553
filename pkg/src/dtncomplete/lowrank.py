"""Hierarchical low-rank matrix completion baseline.

The matrix is split by a dyadic tree into fully observed diagonal blocks and
randomly sampled off-diagonal blocks; each off-diagonal block is completed by
nuclear-norm minimization under the observation constraint::

    minimize ||X||_*   subject to   M * X = M * A

solved by singular value thresholding inside an ADMM splitting, with the
threshold adapted by residual balancing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_dtn_stack, check_mask_stack


@dataclass(frozen=True)
class OffDiagonalBlock:
    rows: tuple[int, int]
    cols: tuple[int, int]
    level: int

    @property
    def shape(self):
        return (self.rows[1] - self.rows[0], self.cols[1] - self.cols[0])

    def slices(self):
        return slice(*self.rows), slice(*self.cols)


@dataclass(frozen=True)
class HierarchicalPartition:
    n: int
    level: int
    diagonal: list = field(default_factory=list)
    offdiagonal: list = field(default_factory=list)

    def blocks(self):
        """All blocks as ``(rows, cols)`` pairs."""
        return list(self.diagonal) + [(b.rows, b.cols) for b in self.offdiagonal]


def partition(n: int, level: int) -> HierarchicalPartition:
    """Recursive dyadic split of ``[n] x [n]``.

    >>> p = partition(128, 3)
    >>> len(p.diagonal), len(p.offdiagonal)
    (8, 14)
    """
    n, level = int(n), int(level)
    if level < 0:
        raise ValueError("level must be non-negative")
    if n % (2**level):
        raise ValueError(f"N_B={n} is not divisible by 2**{level}")
    diag = [(0, n)]
    off = []
    for lv in range(1, level + 1):
        nxt = []
        for a, b in diag:
            m = (a + b) // 2
            nxt += [(a, m), (m, b)]
            off.append(OffDiagonalBlock((a, m), (m, b), lv))
            off.append(OffDiagonalBlock((m, b), (a, m), lv))
        diag = nxt
    return HierarchicalPartition(n, level, [(d, d) for d in diag], off)


ADAPT_EVERY = 10  # iterations between penalty updates; per-step updates oscillate


def nuclear_norm(X) -> float:
    return float(np.linalg.svd(np.asarray(X, float), compute_uv=False).sum())


def svt(Y, tau):
    """Singular value soft-thresholding."""
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vt[:k]


@dataclass
class BlockResult:
    X: np.ndarray
    converged: bool
    iterations: int
    residual: float


def complete_block(observed, mask, tol: float = 1e-6, max_iters: int = 5000, *, rho: float | None = None) -> BlockResult:
    """Minimum nuclear-norm completion of one block.

    Alternating direction method of multipliers on the splitting ``X = Z``,
    ``M * Z = M * A``: the ``X`` step is singular value thresholding at
    ``1 / rho``, the ``Z`` step projects onto the affine constraint set. The
    penalty ``rho`` is rebalanced every ``ADAPT_EVERY`` iterations against the
    primal/dual residual ratio, which plays the role of the threshold
    continuation.

    Returns a :class:`BlockResult` whose ``X`` reproduces the observed entries
    exactly. ``residual`` is the relative splitting gap ``||X - Z||_F / ||Z||_F``
    at exit; ``converged`` is False when the iteration budget ran out before the
    primal and dual residuals both fell below ``tol`` (the last feasible iterate
    is returned).
    """
    M = np.asarray(mask, bool)
    A = np.where(M, np.asarray(observed, float), 0.0)
    if A.shape != M.shape:
        raise ValueError(f"block and mask shapes differ: {A.shape} vs {M.shape}")
    if M.all():
        return BlockResult(A.copy(), True, 0, 0.0)
    spec = np.linalg.norm(A, 2)
    if spec == 0.0:
        return BlockResult(np.zeros_like(A), True, 0, 0.0)

    rho = 10.0 / spec if rho is None else float(rho)
    Z = A.copy()
    U = np.zeros_like(A)  # scaled dual variable; the multiplier is rho * U
    gap = np.inf
    for it in range(1, max_iters + 1):
        X = svt(Z - U, 1.0 / rho)
        Zp = Z
        Z = np.where(M, A, X + U)
        U += X - Z
        scale = max(np.linalg.norm(X), np.linalg.norm(Z), 1e-300)
        r = np.linalg.norm(X - Z)
        d = rho * np.linalg.norm(Z - Zp)
        gap = r / scale
        if r < tol * scale and d < tol * max(rho * np.linalg.norm(U), 1e-300):
            return BlockResult(Z, True, it, float(gap))
        if it % ADAPT_EVERY:
            continue
        if r > 10 * d:
            rho *= 2.0
            U /= 2.0
        elif d > 10 * r:
            rho /= 2.0
            U *= 2.0
    return BlockResult(Z, False, max_iters, float(gap))


def complete_hierarchical(observed, mask, level: int = 3, tol: float = 1e-6, max_iters: int = 5000, symmetrize: bool | None = None):
    """Complete a DtN matrix block-by-block over the hierarchical partition.

    Fully observed blocks are copied; every other block (normally the
    off-diagonal ones) is completed independently by :func:`complete_block`.
    When the observed matrix and the mask are both symmetric the result is
    symmetrized (``symmetrize=None`` auto-detects this).

    Returns
    -------
    X : ndarray
    flags : dict
        ``{(rows, cols): converged}`` for every completed block.
    """
    bits = np.asarray(getattr(mask, "bits", mask), bool)
    obs = np.where(bits, np.asarray(observed, float), 0.0)
    n = obs.shape[0]
    part = partition(n, level)
    X = obs.copy()
    flags = {}
    for rows, cols in part.blocks():
        rs, cs = slice(*rows), slice(*cols)
        mb = bits[rs, cs]
        if mb.all():
            continue
        r = complete_block(obs[rs, cs], mb, tol=tol, max_iters=max_iters)
        X[rs, cs] = r.X
        flags[(rows, cols)] = r.converged
    if symmetrize is None:
        symmetrize = np.array_equal(bits, bits.T) and np.allclose(obs, obs.T, rtol=1e-10, atol=0)
    if symmetrize:
        X = 0.5 * (X + X.T)
    return X, flags


class HierarchicalCompleter(TransformerMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`complete_hierarchical`.

    Stateless: ``fit`` only validates parameters. ``transform(X, masks)``
    completes a stack of observed matrices.
    """

    def __init__(self, level: int = 3, tol: float = 1e-6, max_iters: int = 5000):
        self.level = level
        self.tol = tol
        self.max_iters = max_iters

    def fit(self, X=None, y=None):
        if int(self.level) < 0:
            raise ValueError("level must be non-negative")
        self.is_fitted_ = True
        return self

    def transform(self, X, masks):
        X = check_dtn_stack(X)
        masks = check_mask_stack(masks, X.shape)
        out = np.empty_like(X)
        failed = 0
        for i in range(len(X)):
            out[i], flags = complete_hierarchical(X[i], masks[i], self.level, self.tol, self.max_iters)
            failed += sum(not f for f in flags.values())
        if failed:
            warnings.warn(f"{failed} block completions did not reach tol={self.tol}", RuntimeWarning)
        return out

    def fit_transform(self, X, masks=None, **fit_params):
        return self.fit().transform(X, masks)
