"""Command-line pipeline: mesh, data, training, completion, reconstruction, evaluation."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _io
from ._rng import stream
from .config import DATA_KEYS, DEFAULTS, ConfigError, config_hash, resolve

log = logging.getLogger("dtncomplete")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4

MESH_FILE = "mesh.bin"
MODEL_FILE = "model.bin"
MASK_FILE = "masks.bin"
COMPLETION_KIND = "completion"
RECON_KIND = "reconstruction"
METHODS = ("full", "diffusion", "baseline", "zero-fill")


class MissingInput(FileNotFoundError):
    def __init__(self, path, producer):
        super().__init__(f"missing {path}; run `dtncomplete {producer}` first")


# ---------------------------------------------------------------------------
# helpers


def _workdir(cfg) -> Path:
    return Path(cfg["workdir"])


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingInput(path, producer)
    return path


def _stamp(cfg, **extra) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg["seed"], **extra}


def _load_mesh(cfg):
    from .mesh_fem import TriMesh

    mesh = TriMesh.load(_require(_workdir(cfg) / MESH_FILE, "gen-mesh"))
    if mesh.n_boundary != cfg["n_boundary"]:
        raise ConfigError(f"mesh has N_B={mesh.n_boundary} but config asks for {cfg['n_boundary']}; rerun gen-mesh")
    return mesh


def _load_split(cfg, name):
    from .datasets import load_split

    _require(_workdir(cfg) / f"{name}.bin", "gen-data")
    return load_split(_workdir(cfg), name)


def split_masks(cfg, n: int) -> np.ndarray:
    """Deterministic observation masks for the test split (shared by every method)."""
    from .measurements import mask_hierarchical, mask_principal, mask_random

    nb, s = cfg["n_boundary"], cfg["rate"]
    out = []
    for i in range(n):
        rng = stream(cfg["seed"], "mask/test", i)
        if cfg["mask"] == "principal":
            m = mask_principal(nb, s, rng)
        elif cfg["mask"] == "random":
            m = mask_random(nb, s, rng)
        else:
            m = mask_hierarchical(nb, cfg["level"], s, rng)
        out.append(m.bits)
    return np.stack(out)


def _save_completion(cfg, method, completed, masks):
    path = _workdir(cfg) / f"completed_{method}.bin"
    _io.save(path, COMPLETION_KIND, {"completed": completed, "masks": masks},
             _stamp(cfg, method=method, mask=cfg["mask"], rate=cfg["rate"]))
    return path


def _write_re_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "RE", "RE_zero_fill"])
        for r in rows:
            w.writerow([r[0], f"{r[1]:.6g}", f"{r[2]:.6g}"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_mesh(cfg):
    from .mesh_fem import build_disk_mesh, default_rings

    rings = cfg["n_rings"] or default_rings(cfg["n_boundary"])
    mesh = build_disk_mesh(cfg["n_boundary"], rings)
    path = _workdir(cfg) / MESH_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh.save(path)
    print(f"mesh: N_B={mesh.n_boundary} N_I={mesh.n_interior} triangles={mesh.n_triangles} -> {path}")


def cmd_gen_data(cfg):
    from .datasets import generate_split, sample_records, save_split, write_manifest
    from .mesh_fem import dtn_matrix

    mesh = _load_mesh(cfg)
    lam1 = dtn_matrix(mesh, 1.0)
    wd = _workdir(cfg)
    splits = {}
    for name, n in (("train", cfg["n_train"]), ("test", cfg["n_test"])):
        ds = generate_split(mesh, n, name, cfg["seed"], cfg["sigma"], cfg["image_size"], lam1)
        dig = save_split(wd, name, ds, _stamp(cfg))
        splits[name] = {"file": f"{name}.bin", "digest": dig, "records": sample_records(ds, name)}
    manifest = {
        "config_hash": config_hash(cfg, DATA_KEYS),
        "seed": cfg["seed"],
        "n_boundary": mesh.n_boundary,
        "n_triangles": mesh.n_triangles,
        "sigma": cfg["sigma"],
        "splits": splits,
    }
    path = write_manifest(wd, manifest)
    print(f"data: {cfg['n_train']} train / {cfg['n_test']} test samples -> {path}")


def cmd_train(cfg):
    from .diffusion import DiffusionCompleter, make_schedule, write_loss_csv

    try:
        make_schedule(cfg["T"], cfg["beta_min"], cfg["beta_max"])
    except ValueError as exc:
        raise ConfigError(f"noise schedule: {exc}") from None
    train = _load_split(cfg, "train")
    manifest = json.loads(_require(_workdir(cfg) / "manifest.json", "gen-data").read_text())
    est = DiffusionCompleter(
        mask_kind=cfg["mask"], mask_rates=(cfg["rate"],), T=cfg["T"], beta_min=cfg["beta_min"],
        beta_max=cfg["beta_max"], width=cfg["width"], levels=cfg["levels"], steps=cfg["steps"],
        batch_size=cfg["batch_size"], lr=cfg["lr"], ema_decay=cfg["ema_decay"], weighting=cfg["weighting"],
        n_samples=cfg["n_samples"], random_state=cfg["seed"],
    )
    est.fit(train.normalized)
    wd = _workdir(cfg)
    est.save(wd / MODEL_FILE, manifest_hash=manifest["config_hash"])
    write_loss_csv(wd / "loss.csv", est.loss_trace_)
    first = np.mean([v for _, v in est.loss_trace_[:50]])
    last = np.mean([v for _, v in est.loss_trace_[-50:]])
    print(f"train: {cfg['steps']} steps, loss {first:.4g} -> {last:.4g} -> {wd / MODEL_FILE}")


def _completion_report(cfg, method, completed, test, masks):
    from .metrics import re_frobenius

    rows = [(i, re_frobenius(completed[i], test.normalized[i]), re_frobenius(masks[i] * test.normalized[i], test.normalized[i]))
            for i in range(len(test))]
    _write_re_csv(_workdir(cfg) / f"re_{method}.csv", rows)
    mean_re = float(np.mean([r[1] for r in rows]))
    mean_zf = float(np.mean([r[2] for r in rows]))
    print(f"{method}: mean RE {mean_re:.4f} (zero-fill {mean_zf:.4f}) over {len(rows)} test samples")


def cmd_complete(cfg):
    from .diffusion import DiffusionCompleter

    test = _load_split(cfg, "test")
    est = DiffusionCompleter.load(_require(_workdir(cfg) / MODEL_FILE, "train"))
    if est.n_boundary_ != cfg["n_boundary"]:
        raise ConfigError(f"model was trained for N_B={est.n_boundary_}")
    masks = split_masks(cfg, len(test))
    est.set_params(n_samples=cfg["n_samples"], random_state=cfg["seed"])
    completed = est.predict(masks * test.normalized, masks)
    _save_completion(cfg, "diffusion", completed, masks)
    _completion_report(cfg, "diffusion", completed, test, masks)


def cmd_baseline_complete(cfg):
    from .lowrank import complete_hierarchical

    test = _load_split(cfg, "test")
    masks = split_masks(cfg, len(test))
    completed = np.empty_like(test.normalized)
    failed = 0
    for i in range(len(test)):
        completed[i], flags = complete_hierarchical(masks[i] * test.normalized[i], masks[i], cfg["level"])
        failed += sum(not f for f in flags.values())
    if failed:
        log.warning("%d block completions hit the iteration limit", failed)
    _save_completion(cfg, "baseline", completed, masks)
    _completion_report(cfg, "baseline", completed, test, masks)


def _method_inputs(cfg, test):
    """Normalized DtN estimate per method; None where upstream output is missing."""
    wd = _workdir(cfg)
    masks = split_masks(cfg, len(test))
    out = {"full": test.normalized, "zero-fill": masks * test.normalized}
    for m in ("diffusion", "baseline"):
        path = wd / f"completed_{m}.bin"
        out[m] = _io.load(path, COMPLETION_KIND)[0]["completed"] if path.exists() else None
    return out


def cmd_reconstruct(cfg):
    from .inverse import LinearizedReconstructor
    from .measurements import denormalize
    from .phantoms import rasterize

    mesh = _load_mesh(cfg)
    test = _load_split(cfg, "test")
    rec = LinearizedReconstructor(mesh, lambda_rel=cfg["lambda_rel"], prior=cfg["prior"])
    if cfg["lambda_tune"]:
        train = _load_split(cfg, "train")
        k = min(cfg["lambda_tune"], len(train))
        rec.fit(train.raw[:k], train.gamma[:k])
        log.info("lambda picked on %d training samples: %.3g x ||J||^2", k, rec.lambda_ / rec.J_norm2_)
    else:
        rec.fit()
    wd = _workdir(cfg)
    for method, norm in _method_inputs(cfg, test).items():
        if norm is None:
            producer = "complete" if method == "diffusion" else "baseline-complete"
            log.warning("skipping %s: run `dtncomplete %s` first", method, producer)
            continue
        gam = rec.predict(denormalize(norm, test.background))
        imgs = np.stack([rasterize(mesh, g, cfg["image_size"]) for g in gam])
        _io.save(wd / f"recon_{method}.bin", RECON_KIND, {"gamma": gam, "images": imgs},
                 _stamp(cfg, method=method, lambda_=rec.lambda_))
        print(f"reconstruct: {method} -> recon_{method}.bin")


def cmd_evaluate(cfg):
    from .metrics import evaluation_report

    test = _load_split(cfg, "test")
    wd = _workdir(cfg)
    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    preds = {}
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
        path = wd / f"recon_{m}.bin"
        rate = 1.0 if m == "full" else cfg["rate"]
        preds[m] = (rate, _io.load(path, RECON_KIND)[0]["images"] if path.exists() else None)
        if preds[m][1] is None:
            log.warning("no reconstructions for %s (run `dtncomplete reconstruct`)", m)
    rows, table = evaluation_report(test.images, preds, wd / "metrics.csv")
    (wd / "metrics.txt").write_text(table + "\n", encoding="utf-8")
    print(table)


def cmd_theory_check(cfg):
    from .mesh_fem import build_disk_mesh, default_rings
    from .phantoms import PolygonSpec, regular_polygon
    from .theory import bound_sweep, covering_estimate, empirical_lipschitz, polygon_measurement_sample, write_csv

    out = _workdir(cfg) / "theory"
    out.mkdir(parents=True, exist_ok=True)
    n = cfg["theory_instances"]
    failures = 0
    for kind in ("hausdorff", "symdiff"):
        rows = bound_sweep(kind, n, stream(cfg["seed"], f"theory/{kind}"))
        write_csv(out / f"{kind}.csv", ["n_v", "delta", "value", "bound", "passed"], rows)
        bad = sum(not r[-1] for r in rows)
        failures += bad
        print(f"{kind}: {len(rows) - bad}/{len(rows)} instances within the bound")
    base = PolygonSpec(regular_polygon(5, 0.5))
    ratios = {}
    for nb in (32, 64):
        mesh = build_disk_mesh(nb, default_rings(nb))
        rep = empirical_lipschitz(mesh, base, 50, 1e-3, stream(cfg["seed"], "theory/lipschitz", nb))
        ratios[nb] = rep.max_ratio
        write_csv(out / f"lipschitz_{nb}.csv", ["probe", "ratio"], list(enumerate(rep.ratios)))
    print(f"lipschitz: max ratio {ratios[32]:.4g} (N_B=32), {ratios[64]:.4g} (N_B=64)")
    mesh = build_disk_mesh(cfg["n_boundary"], cfg["n_rings"] or default_rings(cfg["n_boundary"]))
    pts = polygon_measurement_sample(mesh, 3, cfg["theory_polygons"], stream(cfg["seed"], "theory/covering"))
    cov = covering_estimate(pts, intrinsic_dim=6)
    write_csv(out / "covering.csv", ["eps", "count", "in_fit"], [(f"{e:.6g}", c, int(u)) for e, c, u in zip(cov.eps, cov.counts, cov.used)])
    print(f"covering: fitted slope {cov.slope:.3f} (2 n_v = 6)")
    if failures:
        print(f"theory-check: {failures} bound violations", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_plot(cfg, index: int = 0):
    from .pnm import write_pgm, write_ppm

    test = _load_split(cfg, "test")
    if not 0 <= index < len(test):
        raise ConfigError(f"index {index} outside the test split")
    wd = _workdir(cfg)
    out = wd / "plots"
    out.mkdir(parents=True, exist_ok=True)
    truth = test.images[index]
    lo, hi = 0.0, float(truth.max())
    write_pgm(out / f"truth_{index}.pgm", truth, lo, hi)
    written = 1
    for m in METHODS:
        path = wd / f"recon_{m}.bin"
        if not path.exists():
            continue
        img = _io.load(path, RECON_KIND)[0]["images"][index]
        write_pgm(out / f"{m}_{index}.pgm", img, lo, hi)
        err = img - truth
        a = float(np.abs(err).max()) or 1.0
        write_ppm(out / f"{m}_{index}_error.ppm", err, vmin=-a, vmax=a)
        written += 2
    if written == 1:
        raise MissingInput(wd / "recon_full.bin", "reconstruct")
    print(f"plot: {written} images -> {out}")


COMMANDS = {
    "gen-mesh": cmd_gen_mesh,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "complete": cmd_complete,
    "baseline-complete": cmd_baseline_complete,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "theory-check": cmd_theory_check,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("-v", "--verbose", action="store_true")
    for key, default in DEFAULTS.items():
        common.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"(default: {default})")
    common.add_argument("--samples", dest="n_train", default=None, help="alias for --n-train")
    parser = argparse.ArgumentParser(prog="dtncomplete", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "plot":
            p.add_argument("--index", type=int, default=0, help="test sample to draw")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in DEFAULTS}
    try:
        cfg = resolve(args.config, overrides)
        fn = COMMANDS[args.command]
        rc = fn(cfg, args.index) if args.command == "plot" else fn(cfg)
        return rc or EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
