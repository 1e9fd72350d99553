"""Disk-phantom datasets: generation, on-disk records and the manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _io
from ._rng import stream
from .measurements import inject_noise, normalize
from .mesh_fem import TriMesh, dtn_matrix
from .phantoms import DiskPhantomSpec, rasterize, sample_disks, to_conductivity

MAX_INCLUSIONS = 5
SPLIT_KIND = "disk-split"
MANIFEST = "manifest.json"


@dataclass
class DiskDataset:
    """Stacked samples of one split.

    ``raw`` and ``normalized`` hold DtN matrices, ``gamma`` element
    conductivities and ``images`` the rasterized conductivity. Disk parameters
    are padded to ``MAX_INCLUSIONS`` rows; ``n_inclusions`` gives the used count.
    """

    raw: np.ndarray
    normalized: np.ndarray
    gamma: np.ndarray
    images: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    contrasts: np.ndarray
    n_inclusions: np.ndarray
    background: np.ndarray

    def __len__(self) -> int:
        return len(self.raw)

    def spec(self, i: int) -> DiskPhantomSpec:
        k = int(self.n_inclusions[i])
        return DiskPhantomSpec(self.centers[i, :k], self.radii[i, :k], self.contrasts[i, :k])

    def to_arrays(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def generate_split(mesh: TriMesh, n_samples: int, split: str, master_seed: int, sigma: float = 0.0,
                   image_size: int = 128, background=None) -> DiskDataset:
    """Draw ``n_samples`` disk phantoms and their (optionally noisy) DtN data.

    Phantom ``i`` uses stream ``("phantom/<split>", i)`` of the master seed and its
    noise uses ``("noise/<split>", i)``, so any sample is reproducible on its own.
    """
    lam1 = dtn_matrix(mesh, 1.0) if background is None else np.asarray(background, float)
    n, nb = int(n_samples), mesh.n_boundary
    raw = np.empty((n, nb, nb))
    gam = np.empty((n, mesh.n_triangles))
    imgs = np.empty((n, image_size, image_size))
    centers = np.zeros((n, MAX_INCLUSIONS, 2))
    radii = np.zeros((n, MAX_INCLUSIONS))
    contrasts = np.zeros((n, MAX_INCLUSIONS))
    counts = np.zeros(n, np.int64)
    for i in range(n):
        rng = stream(master_seed, f"phantom/{split}", i)
        k = int(rng.integers(2, MAX_INCLUSIONS + 1))
        spec = sample_disks(rng, k)
        g = to_conductivity(spec, mesh)
        lam = dtn_matrix(mesh, g)
        if sigma:
            lam = inject_noise(lam, lam1, sigma, stream(master_seed, f"noise/{split}", i))
        raw[i], gam[i] = lam, g
        imgs[i] = rasterize(mesh, g, image_size)
        centers[i, :k], radii[i, :k], contrasts[i, :k], counts[i] = spec.centers, spec.radii, spec.contrasts, k
    return DiskDataset(raw, normalize(raw, lam1), gam, imgs, centers, radii, contrasts, counts, lam1)


def save_split(directory, name: str, ds: DiskDataset, meta: dict | None = None) -> str:
    """Write one split container; returns its content digest."""
    data = _io.dumps(SPLIT_KIND, ds.to_arrays(), {"split": name, **(meta or {})})
    path = Path(directory) / f"{name}.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".bin.tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return _io.digest(data)


def load_split(directory, name: str) -> DiskDataset:
    path = Path(directory) / f"{name}.bin"
    if not path.exists():
        raise FileNotFoundError(path)
    arrays, _ = _io.load(path, SPLIT_KIND)
    return DiskDataset(**arrays)


def sample_records(ds: DiskDataset, split: str) -> list:
    """Per-sample manifest entries (index, inclusion count, content digest)."""
    out = []
    for i in range(len(ds)):
        d = _io.digest(ds.raw[i].tobytes(), ds.gamma[i].tobytes())
        out.append({"split": split, "index": i, "n_inclusions": int(ds.n_inclusions[i]), "digest": d})
    return out


def write_manifest(directory, payload: dict) -> Path:
    path = Path(directory) / MANIFEST
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise FileNotFoundError(path)
    return json.loads(path.read_text(encoding="utf-8"))
