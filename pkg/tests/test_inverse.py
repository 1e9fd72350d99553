import numpy as np
import pytest
from sklearn.base import clone

from dtncomplete.inverse import LinearizedReconstructor, reconstruct, sensitivity
from dtncomplete.mesh_fem import build_disk_mesh, dtn_matrix
from dtncomplete.phantoms import DiskPhantomSpec, to_conductivity


@pytest.fixture(scope="module")
def J32(mesh32):
    return sensitivity(mesh32)


def test_sensitivity_symmetry(J32):
    J, _ = J32
    Jr = J.reshape(32, 32, -1)
    np.testing.assert_array_equal(Jr, Jr.transpose(1, 0, 2))


def test_sensitivity_homogeneity(J32):
    # Lambda is linear in a global scale of gamma, so the column sum is Lambda_1
    J, lam1 = J32
    np.testing.assert_allclose(J.sum(axis=1).reshape(32, 32), lam1, atol=1e-12)


@pytest.mark.parametrize("e", [0, 57, 150])
def test_sensitivity_finite_difference(mesh32, J32, e):
    J, lam1 = J32
    g = np.ones(mesh32.n_triangles)
    g[e] += 1e-4
    fd = (dtn_matrix(mesh32, g) - lam1).ravel() / 1e-4
    assert np.linalg.norm(fd - J[:, e]) / np.linalg.norm(J[:, e]) < 0.01


def test_background_data_gives_background(mesh32, J32):
    rec = LinearizedReconstructor(mesh32).fit()
    np.testing.assert_allclose(rec.delta(J32[1]), 0.0, atol=1e-10)
    np.testing.assert_allclose(rec.predict(J32[1]), 1.0, atol=1e-10)


@pytest.mark.parametrize("prior", ["noser", "identity"])
def test_matches_normal_equations(mesh32, J32, prior):
    J, lam1 = J32
    rec = LinearizedReconstructor(mesh32, lambda_rel=1e-2, prior=prior).fit()
    lam = dtn_matrix(mesh32, to_conductivity(DiskPhantomSpec.single((0.3, 0.1), 0.25, 2.0), mesh32))
    W = np.diag(rec.weights_)
    ref = np.linalg.solve(J.T @ J + rec.lambda_ * W, J.T @ (lam - lam1).ravel())
    np.testing.assert_allclose(rec.delta(lam)[0], ref, rtol=1e-7, atol=1e-9)


@pytest.mark.parametrize("nb,rings", [(32, 6), (64, 11)])
def test_centered_inclusion_peak_inside(nb, rings):
    mesh = build_disk_mesh(nb, rings)
    gam = to_conductivity(DiskPhantomSpec.single((0.0, 0.0), 0.2, 1.5), mesh)
    rec = LinearizedReconstructor(mesh).fit()
    assert gam[np.argmax(rec.delta(dtn_matrix(mesh, gam))[0])] > 1


def test_reconstruct_and_floor(mesh32):
    gam = to_conductivity(DiskPhantomSpec.single((0.0, 0.4), 0.3, 8.0), mesh32)
    g = reconstruct(dtn_matrix(mesh32, gam), mesh32, 1e-2)
    assert g.shape == (mesh32.n_triangles,)
    assert g.min() >= 0.1


def test_lambda_search(mesh32):
    specs = [DiskPhantomSpec.single((0.3 * np.cos(a), 0.3 * np.sin(a)), 0.2, 3.0) for a in (0.0, 2.0, 4.0)]
    y = np.stack([to_conductivity(s, mesh32) for s in specs])
    X = np.stack([dtn_matrix(mesh32, g) for g in y])
    rec = LinearizedReconstructor(mesh32, lambda_grid=[1e-5, 1e-3, 1e-1]).fit(X, y)
    assert rec.lambda_scores_.shape == (3,)
    best = [1e-5, 1e-3, 1e-1][int(np.argmin(rec.lambda_scores_))]
    assert rec.lambda_ == pytest.approx(best * rec.J_norm2_)


def test_estimator_contract(mesh32):
    rec = LinearizedReconstructor(mesh32, lambda_rel=1e-2)
    assert clone(rec).get_params()["lambda_rel"] == 1e-2
    with pytest.raises(ValueError):
        LinearizedReconstructor(mesh32, prior="nope").fit()
    with pytest.raises(ValueError):
        rec.fit().predict(np.eye(16))
