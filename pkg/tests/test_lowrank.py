import cvxpy as cp
import numpy as np
import pytest
from sklearn.base import clone

from dtncomplete.lowrank import (
    HierarchicalCompleter,
    complete_block,
    complete_hierarchical,
    nuclear_norm,
    partition,
    svt,
)
from dtncomplete.measurements import mask_hierarchical, mask_random


def rank1(n, seed):
    r = np.random.default_rng(seed)
    return np.outer(r.standard_normal(n), r.standard_normal(n))


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("n,level", [(128, 3), (64, 2), (32, 1), (48, 4)])
def test_partition_tiles(n, level):
    if n % 2**level:
        with pytest.raises(ValueError):
            partition(n, level)
        return
    p = partition(n, level)
    cover = np.zeros((n, n), int)
    for rows, cols in p.blocks():
        cover[slice(*rows), slice(*cols)] += 1
    assert np.all(cover == 1)
    assert len(p.diagonal) == 2**level
    assert len(p.offdiagonal) == 2 ** (level + 1) - 2


def test_partition_one_split():
    p = partition(128, 1)
    assert p.diagonal == [((0, 64), (0, 64)), ((64, 128), (64, 128))]
    assert [b.shape for b in p.offdiagonal] == [(64, 64), (64, 64)]


def test_svt_shrinks_singular_values(rng):
    Y = rng.standard_normal((10, 7))
    s = np.linalg.svd(Y, compute_uv=False)
    np.testing.assert_allclose(np.linalg.svd(svt(Y, 0.5), compute_uv=False)[: (s > 0.5).sum()], s[s > 0.5] - 0.5)


def test_exact_recovery_rank1():
    A = rank1(64, 0)
    M = mask_random(64, 0.30, 1).bits
    r = complete_block(A * M, M)
    assert r.converged
    assert rel(r.X, A) < 1e-3
    np.testing.assert_allclose(r.X[M], A[M])


def test_fails_at_one_percent():
    A = rank1(64, 0)
    M = mask_random(64, 0.01, 1).bits
    assert rel(complete_block(A * M, M).X, A) > 0.3


def test_trivial_masks(rng):
    A = rng.standard_normal((12, 12))
    np.testing.assert_array_equal(complete_block(A, np.ones((12, 12), bool)).X, A)
    np.testing.assert_array_equal(complete_block(A, np.zeros((12, 12), bool)).X, 0)


def test_matches_convex_solver_on_small_block():
    # independent oracle: the same convex program solved by a conic solver
    r = np.random.default_rng(7)
    A = r.standard_normal((12, 2)) @ r.standard_normal((2, 12))
    M = r.random((12, 12)) < 0.45
    X = cp.Variable((12, 12))
    prob = cp.Problem(cp.Minimize(cp.normNuc(X)), [cp.multiply(M.astype(float), X) == M * A])
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    ours = complete_block(A * M, M, tol=1e-9, max_iters=20000).X
    assert abs(nuclear_norm(ours) - prob.value) / prob.value < 1e-4
    assert nuclear_norm(ours) <= nuclear_norm(A) + 1e-6


def test_hierarchical_symmetrizes():
    A = rank1(64, 3)
    A = A + A.T
    M = mask_hierarchical(64, 2, 0.4, 0, symmetric=True).bits
    X, flags = complete_hierarchical(A * M, M, level=2)
    assert np.linalg.norm(X - X.T) / np.linalg.norm(X) < 1e-6
    assert all(flags.values())
    assert len(flags) == 6


def test_fully_observed_is_identity(rng):
    A = rng.standard_normal((32, 32))
    X, flags = complete_hierarchical(A, np.ones((32, 32), bool))
    np.testing.assert_array_equal(X, A)
    assert flags == {}


def test_estimator_api(rng):
    est = HierarchicalCompleter(level=2, tol=1e-7)
    assert est.get_params() == {"level": 2, "tol": 1e-7, "max_iters": 5000}
    assert clone(est).get_params() == est.get_params()
    A = np.stack([rank1(32, k) for k in range(2)])
    masks = np.stack([mask_hierarchical(32, 2, 0.5, k).bits for k in range(2)])
    out = est.fit_transform(A * masks, masks)
    assert out.shape == A.shape
    np.testing.assert_allclose(out[masks], A[masks])


def test_estimator_warns_on_budget(rng):
    A = rank1(32, 1)[None]
    M = mask_random(32, 0.3, 2).bits
    with pytest.warns(RuntimeWarning):
        HierarchicalCompleter(level=1, max_iters=2).fit_transform(A * M, M)


def test_nuclear_norm_never_exceeds_truth():
    # the optimum is at most the nuclear norm of any feasible point, the truth included;
    # a few coherent rank-1 draws have a strictly smaller feasible optimum (no recovery)
    for seed in range(20):
        r = np.random.default_rng(seed)
        A = np.outer(r.standard_normal(48), r.standard_normal(48))
        M = r.random((48, 48)) < 0.3
        res = complete_block(A * M, M)
        assert res.converged
        assert nuclear_norm(res.X) <= nuclear_norm(A) * (1 + 1e-5)
