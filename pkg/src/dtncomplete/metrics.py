"""Evaluation metrics and report tables."""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.ndimage import uniform_filter

from .phantoms import disk_grid_mask

REPORT_COLUMNS = ("method", "rate", "SSIM", "RE", "MAE")


def re_frobenius(estimate, truth) -> float:
    """``||estimate - truth||_F / ||truth||_F``."""
    estimate = np.asarray(estimate, float)
    truth = np.asarray(truth, float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    nt = np.linalg.norm(truth)
    if nt == 0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(estimate - truth) / nt)


def conductivity_errors(gamma_hat, gamma) -> tuple[float, float]:
    """Relative l2 error and mean absolute error over grid points inside the unit disk."""
    gamma_hat = np.asarray(gamma_hat, float)
    gamma = np.asarray(gamma, float)
    if gamma_hat.shape != gamma.shape or gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise ValueError(f"expected two equal square images, got {gamma_hat.shape} and {gamma.shape}")
    inside = disk_grid_mask(gamma.shape[0])
    diff = gamma_hat[inside] - gamma[inside]
    re = float(np.sqrt(np.sum(diff**2)) / np.sqrt(np.sum(gamma[inside] ** 2)))
    return re, float(np.mean(np.abs(diff)))


def ssim(a, b, window: int = 7, data_range: float | None = None, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity with a uniform ``window x window`` filter.

    Local statistics use the unbiased sample covariance; ``C1 = (k1 L)^2`` and
    ``C2 = (k2 L)^2`` with ``L`` the data range of ``b`` (the reference) unless
    given. The mean excludes a border of ``window // 2`` pixels.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if window % 2 == 0 or window < 3:
        raise ValueError("window must be odd and at least 3")
    if min(a.shape) < window:
        raise ValueError(f"window {window} is larger than the image {a.shape}")
    L = float(b.max() - b.min()) if data_range is None else float(data_range)
    if L == 0:
        L = 1.0
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    npx = window**a.ndim
    cov = npx / (npx - 1.0)
    f = lambda x: uniform_filter(x, size=window)
    ux, uy = f(a), f(b)
    vx = cov * (f(a * a) - ux * ux)
    vy = cov * (f(b * b) - uy * uy)
    vxy = cov * (f(a * b) - ux * uy)
    S = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux**2 + uy**2 + c1) * (vx + vy + c2))
    p = window // 2
    return float(S[(slice(p, -p),) * a.ndim].mean())


def image_metrics(pred, truth) -> dict:
    re, mae = conductivity_errors(pred, truth)
    return {"SSIM": ssim(pred, truth), "RE": re, "MAE": mae}


def evaluation_report(truth_images, predictions: dict, csv_path=None):
    """Per-method mean SSIM / RE / MAE over a split.

    Parameters
    ----------
    truth_images : array, shape (n, H, W)
    predictions : dict
        ``method -> (rate, images)``; ``images`` may be None when a method's
        outputs are missing, which yields a row of NaNs instead of an error.

    Returns
    -------
    rows : list of dict with keys ``REPORT_COLUMNS``
    table : str
        Fixed-width text rendering; the best value of each metric is starred.
    """
    truth_images = np.asarray(truth_images, float)
    rows = []
    for method, (rate, images) in predictions.items():
        if images is None:
            rows.append({"method": method, "rate": rate, "SSIM": math.nan, "RE": math.nan, "MAE": math.nan})
            continue
        images = np.asarray(images, float)
        if images.shape != truth_images.shape:
            raise ValueError(f"{method}: predictions {images.shape} vs truth {truth_images.shape}")
        per = [image_metrics(p, t) for p, t in zip(images, truth_images)]
        rows.append({"method": method, "rate": rate, **{k: float(np.mean([m[k] for m in per])) for k in ("SSIM", "RE", "MAE")}})
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
            w.writeheader()
            for r in rows:
                w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    return rows, format_table(rows)


def format_table(rows) -> str:
    best = {}
    for key, better in (("SSIM", max), ("RE", min), ("MAE", min)):
        vals = [r[key] for r in rows if not math.isnan(r[key])]
        best[key] = better(vals) if vals else None
    width = max([len("method")] + [len(str(r["method"])) for r in rows])
    lines = [f"{'method':<{width}}  {'rate':>8}  {'SSIM':>8}  {'RE':>8}  {'MAE':>8}"]
    for r in rows:
        cells = []
        for key in ("SSIM", "RE", "MAE"):
            v = r[key]
            txt = "missing" if math.isnan(v) else f"{v:.4f}"
            cells.append(f"{txt + ('*' if v == best[key] else ''):>8}")
        rate = r["rate"]
        rate_txt = f"{rate:.4g}" if isinstance(rate, float) else str(rate)
        lines.append(f"{str(r['method']):<{width}}  {rate_txt:>8}  " + "  ".join(cells))
    return "\n".join(lines)
