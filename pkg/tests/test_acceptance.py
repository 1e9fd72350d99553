"""Acceptance criteria, one test per criterion.

Every test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers and runtime (run with ``pytest -s`` to see them inline; they are also
collected in the terminal summary). The desk-scale diffusion model is trained
once per session and shared by criteria 5 and 7.
"""

import time

import numpy as np
import pytest
import torch
from scipy.stats import kstest

from dtncomplete._rng import stream
from dtncomplete.diffusion import (
    ConvScoreNet,
    DiffusionCompleter,
    MaskDistribution,
    ddpm_sample,
    desk_schedule,
    make_condition,
    paper_schedule,
    score_matching_loss,
    train,
)
from dtncomplete.inverse import LinearizedReconstructor
from dtncomplete.lowrank import complete_block, complete_hierarchical
from dtncomplete.measurements import denormalize, hierarchical_expected_rate, mask_hierarchical, mask_principal, mask_random, normalize
from dtncomplete.mesh_fem import build_disk_mesh, default_rings, dtn_matrix, paper_scale_mesh
from dtncomplete.metrics import conductivity_errors, re_frobenius
from dtncomplete.phantoms import rasterize, sample_disks, to_conductivity
from dtncomplete.theory import bound_sweep, covering_estimate, polygon_measurement_sample

SEED = 2024

# desk-scale diffusion run shared by criteria 5 and 7
DESK = dict(n_boundary=32, n_train=200, n_test=50, rate=0.01, steps=5000, lr=1e-3, n_samples=8, lambda_tune=40)

LINES = []


def report(n, passed, detail, seconds, limit):
    ok = bool(passed) and seconds < limit
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail} | {seconds:.1f}s (limit {limit:.0f}s)"
    LINES.append(line)
    print("\n" + line)
    return ok



# ---------------------------------------------------------------------------


def test_criterion_1_dtn_invariants():
    t0 = time.time()
    mesh = build_disk_mesh(32, default_rings(32))
    sym, row = 0.0, 0.0
    for i in range(50):
        rng = stream(SEED, "phantom/c1", i)
        lam = dtn_matrix(mesh, to_conductivity(sample_disks(rng, int(rng.integers(2, 6))), mesh))
        scale = np.abs(lam).max()
        sym = max(sym, np.abs(lam - lam.T).max() / scale)
        row = max(row, np.abs(lam @ np.ones(32)).max() / scale)
    ok = report(1, sym < 1e-10 and row < 1e-8, f"max symmetry residual {sym:.2e}, max |L 1|/max|L| {row:.2e} over 50 phantoms",
                time.time() - t0, 30)
    assert ok


def test_criterion_2_background_spectrum():
    t0 = time.time()
    mesh = build_disk_mesh(64, default_rings(64))
    lam = dtn_matrix(mesh, 1.0)
    theta = mesh.boundary_angles
    h = 2 * np.pi / 64
    worst = 0.0
    for k in range(1, 5):
        for f in (np.cos(k * theta), np.sin(k * theta)):
            worst = max(worst, abs(f @ lam @ f / (h * f @ f) - k) / k)
    ok = report(2, worst < 0.05, f"max relative deviation from |k| for |k|<=4: {worst:.4f}", time.time() - t0, 10)
    assert ok


def test_criterion_3_mask_arithmetic():
    t0 = time.time()
    m = mask_principal(128, 0.01, stream(SEED, "mask/c3"))
    expected = hierarchical_expected_rate(128, 3, 0.15)
    h = mask_hierarchical(128, 3, 0.15, stream(SEED, "mask/c3", 1))
    sd = np.sqrt(0.15 * 0.85 * 14336) / 16384
    ok = m.n_observed == 144 and expected == 0.25625 and abs(h.realized_rate - expected) < 3 * sd
    ok = report(3, ok, f"principal observed {m.n_observed}, hierarchical expected {expected:.5%}, realized {h.realized_rate:.5%}",
                time.time() - t0, 1)
    assert ok


def _gradient_check():
    sch = desk_schedule()
    torch.manual_seed(0)
    m = ConvScoreNet(16, sch.alpha_bar, width=8).double()
    rng = np.random.default_rng(0)
    x0 = torch.as_tensor(rng.standard_normal((2, 16, 16)))
    cond = make_condition(x0, rng.random((2, 16, 16)) < 0.3)
    t = torch.tensor([5, 150])
    w = torch.as_tensor(rng.standard_normal((2, 16, 16)))
    params = list(m.parameters())
    loss = score_matching_loss(m, x0, cond, t, w, sch.alpha_bar)
    grads = torch.autograd.grad(loss, params)
    sizes = [p.numel() for p in params]
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    with torch.no_grad():
        for k in rng.choice(offsets[-1], 150, replace=False):
            j = int(np.searchsorted(offsets, k, side="right") - 1)
            flat, idx = params[j].view(-1), int(k - offsets[j])
            old = flat[idx].item()
            flat[idx] = old + 1e-5
            lp = score_matching_loss(m, x0, cond, t, w, sch.alpha_bar).item()
            flat[idx] = old - 1e-5
            lm = score_matching_loss(m, x0, cond, t, w, sch.alpha_bar).item()
            flat[idx] = old
            fd, ad = (lp - lm) / 2e-5, grads[j].view(-1)[idx].item()
            worst = max(worst, abs(fd - ad) / max(abs(fd), abs(ad), 1e-8))
    return worst


def _gaussian_sampler_ks():
    sch = paper_schedule()
    mu = torch.tensor([1.0, -2.0, 0.5, 3.0], dtype=torch.float64)
    ab = torch.as_tensor(sch.alpha_bar)
    y = ddpm_sample(lambda y, t: -(y - torch.sqrt(ab[t - 1])[:, None] * mu), (10000, 4), sch, SEED, dtype=torch.float64)
    z = (y - mu).numpy()
    return max(kstest(z[:, k], "norm").statistic for k in range(4))


def _overfit_ratio():
    sch = desk_schedule()
    x = np.random.default_rng(0).standard_normal((1, 32, 32))
    torch.manual_seed(0)
    res = train(ConvScoreNet(32, sch.alpha_bar), x, sch, mask_distribution=MaskDistribution("full"),
                steps=400, batch_size=8, lr=2e-3, seed=0)
    tr = np.array([v for _, v in res.loss_trace])
    return tr[-50:].mean() / tr[:10].mean()


def test_criterion_4_diffusion_machinery():
    t0 = time.time()
    grad = _gradient_check()
    ks = _gaussian_sampler_ks()
    ratio = _overfit_ratio()
    ok = grad < 1e-4 and ks < 0.02 and ratio < 0.1
    ok = report(4, ok, f"(a) grad rel err {grad:.2e} (b) max KS {ks:.4f} (c) final/initial loss {ratio:.3f}", time.time() - t0, 300)
    assert ok


# ---------------------------------------------------------------------------
# desk-scale run shared by criteria 5 and 7


@pytest.fixture(scope="session")
def desk():
    t0 = time.time()
    nb = DESK["n_boundary"]
    mesh = build_disk_mesh(nb, default_rings(nb))
    lam1 = dtn_matrix(mesh, 1.0)

    def split(name, n):
        raw, gam = [], []
        for i in range(n):
            rng = stream(SEED, f"phantom/{name}", i)
            g = to_conductivity(sample_disks(rng, int(rng.integers(2, 6))), mesh)
            raw.append(dtn_matrix(mesh, g))
            gam.append(g)
        return np.array(raw), np.array(gam)

    raw_tr, gam_tr = split("train", DESK["n_train"])
    raw_te, gam_te = split("test", DESK["n_test"])
    Xtr, Xte = normalize(raw_tr, lam1), normalize(raw_te, lam1)
    masks = np.array([mask_principal(nb, DESK["rate"], stream(SEED, "mask/test", i)).bits for i in range(len(Xte))])
    est = DiffusionCompleter(steps=DESK["steps"], lr=DESK["lr"], n_samples=DESK["n_samples"], random_state=SEED).fit(Xtr)
    pred = est.predict(Xte * masks, masks)
    return dict(mesh=mesh, lam1=lam1, Xtr=Xtr, raw_tr=raw_tr, gam_tr=gam_tr, Xte=Xte, raw_te=raw_te, gam_te=gam_te, masks=masks, pred=pred,
                seconds=time.time() - t0)


def test_criterion_5_desk_completion(desk):
    t0 = time.time()
    Xte, masks, pred = desk["Xte"], desk["masks"], desk["pred"]
    n = len(Xte)
    re_diff = np.mean([re_frobenius(pred[i], Xte[i]) for i in range(n)])
    re_zero = np.mean([re_frobenius(masks[i] * Xte[i], Xte[i]) for i in range(n)])
    re_hier = np.mean([re_frobenius(complete_hierarchical(masks[i] * Xte[i], masks[i], 3)[0], Xte[i]) for i in range(n)])
    re_mean = np.mean([re_frobenius(desk["Xtr"].mean(axis=0), Xte[i]) for i in range(n)])
    ok = re_diff < 0.5 * re_zero and re_diff < re_hier
    ok = report(5, ok, f"diffusion RE {re_diff:.4f} vs 0.5 x zero-fill {0.5 * re_zero:.4f} and hierarchical {re_hier:.4f} "
                f"(training-mean predictor {re_mean:.4f})", desk["seconds"] + time.time() - t0, 1800)
    assert ok


def test_criterion_6_baseline_regimes():
    t0 = time.time()
    r = np.random.default_rng(SEED)
    A = np.outer(r.standard_normal(64), r.standard_normal(64))
    M30 = mask_random(64, 0.30, stream(SEED, "mask/c6", 0)).bits
    M01 = mask_random(64, 0.01, stream(SEED, "mask/c6", 1)).bits
    re30 = re_frobenius(complete_block(A * M30, M30).X, A)
    re01 = re_frobenius(complete_block(A * M01, M01).X, A)
    # upper-right 64 x 64 block of the normalized paper-scale DtN
    mesh = paper_scale_mesh()
    lam1 = dtn_matrix(mesh, 1.0)
    res = {0.15: [], 0.30: []}
    for i in range(12):
        rng = stream(SEED, "phantom/c6", i)
        B = normalize(dtn_matrix(mesh, to_conductivity(sample_disks(rng, 2 + i % 4), mesh)), lam1)[:64, 64:]
        for s in res:
            M = mask_random(64, s, stream(SEED, f"mask/c6/{s}", i)).bits
            res[s].append(re_frobenius(complete_block(B * M, M).X, B))
    med = {s: float(np.median(v)) for s, v in res.items()}
    mean = {s: float(np.mean(v)) for s, v in res.items()}
    ok = re30 < 1e-3 and re01 > 0.3 and 0.03 <= med[0.15] <= 0.15 and 0.003 <= med[0.30] <= 0.03
    ok = report(6, ok, f"rank-1 RE {re30:.1e} (s=0.30), {re01:.3f} (s=0.01); DtN block median RE "
                f"{med[0.15]:.2%} (s=0.15), {med[0.30]:.2%} (s=0.30); means {mean[0.15]:.2%}, {mean[0.30]:.2%}",
                time.time() - t0, 300)
    assert ok


def test_criterion_7_end_to_end_ordering(desk):
    t0 = time.time()
    mesh, lam1 = desk["mesh"], desk["lam1"]
    # the fixed solver's weight is chosen on training phantoms only
    k = DESK["lambda_tune"]
    rec = LinearizedReconstructor(mesh).fit(desk["raw_tr"][:k], desk["gam_tr"][:k])
    inputs = {
        "full": desk["raw_te"],
        "diffusion": denormalize(desk["pred"], lam1),
        "zero-fill": desk["masks"] * desk["raw_te"],
    }
    err = {}
    truth = [rasterize(mesh, g, 128) for g in desk["gam_te"]]
    for name, X in inputs.items():
        err[name] = np.array([conductivity_errors(rasterize(mesh, g, 128), t)[0] for g, t in zip(rec.predict(X), truth)])
    ordered = (err["full"] <= err["diffusion"]) & (err["diffusion"] <= err["zero-fill"])
    frac = ordered.mean()
    ok = report(7, frac >= 0.8, f"ordering holds on {frac:.0%} of {len(ordered)} samples "
                f"(lambda {rec.lambda_ / rec.J_norm2_:.3g} x ||J||^2); mean RE full {err['full'].mean():.3f}, "
                f"diffusion {err['diffusion'].mean():.3f}, zero-fill {err['zero-fill'].mean():.3f}", time.time() - t0, 600)
    assert ok


def test_criterion_8_theory_checks():
    t0 = time.time()
    bad = {k: sum(not row[-1] for row in bound_sweep(k, 100, stream(SEED, f"theory/{k}"))) for k in ("hausdorff", "symdiff")}
    pts = polygon_measurement_sample(build_disk_mesh(32, default_rings(32)), 3, 500, stream(SEED, "theory/covering"))
    cov = covering_estimate(pts, intrinsic_dim=6)
    ok = bad["hausdorff"] == 0 and bad["symdiff"] == 0 and np.isfinite(cov.slope) and cov.slope <= 6.5
    ok = report(8, ok, f"violations: Hausdorff {bad['hausdorff']}/100, symmetric difference {bad['symdiff']}/100; "
                f"covering slope {cov.slope:.2f} (n_v=3)", time.time() - t0, 600)
    assert ok
