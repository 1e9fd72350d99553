import csv

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from dtncomplete.metrics import REPORT_COLUMNS, conductivity_errors, evaluation_report, re_frobenius, ssim
from dtncomplete.phantoms import disk_grid_mask


def test_re_identities(rng):
    X = rng.standard_normal((8, 8))
    assert re_frobenius(X, X) == 0.0
    assert re_frobenius(np.zeros_like(X), X) == 1.0
    assert re_frobenius(1.1 * X, X) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        re_frobenius(X, np.zeros_like(X))


def test_constant_offset():
    g = disk_grid_mask(64).astype(float)
    re, mae = conductivity_errors(g + 0.5 * g, g)
    assert re == pytest.approx(0.5) and mae == pytest.approx(0.5)
    assert conductivity_errors(g, g) == (0.0, 0.0)


def test_outside_pixels_ignored(rng):
    g = disk_grid_mask(64) * rng.uniform(1, 3, (64, 64))
    h = g + 0.1
    base = conductivity_errors(h, g)
    h[~disk_grid_mask(64)] = rng.normal(0, 100, (~disk_grid_mask(64)).sum())
    assert conductivity_errors(h, g) == base


def test_ssim_matches_skimage(rng):
    a = rng.random((64, 64))
    b = a + 0.2 * rng.standard_normal((64, 64))
    ref = structural_similarity(a, b, win_size=7, data_range=1.0)
    assert ssim(a, b, data_range=1.0) == pytest.approx(ref, abs=1e-12)


def test_ssim_properties(rng):
    a = rng.random((32, 32))
    b = rng.random((32, 32))
    assert ssim(a, a) == 1.0
    assert ssim(a, b, data_range=1.0) == pytest.approx(ssim(b, a, data_range=1.0))
    checker = (np.add.outer(np.arange(64), np.arange(64)) % 2).astype(float)
    assert ssim(checker, 1 - checker) < 0.1


def test_report_schema(tmp_path, rng):
    truth = rng.uniform(1, 2, (1, 32, 32)) * disk_grid_mask(32)
    pred = truth + 0.1 * disk_grid_mask(32)
    rows, table = evaluation_report(truth, {"full": (1.0, pred), "diffusion": (0.01, None)}, tmp_path / "m.csv")
    re, mae = conductivity_errors(pred[0], truth[0])
    assert rows[0]["RE"] == pytest.approx(re) and rows[0]["MAE"] == pytest.approx(mae)
    assert rows[0]["SSIM"] == pytest.approx(ssim(pred[0], truth[0]))
    assert np.isnan(rows[1]["RE"])
    assert "missing" in table and "*" in table
    with open(tmp_path / "m.csv") as fh:
        assert tuple(next(csv.reader(fh))) == REPORT_COLUMNS
