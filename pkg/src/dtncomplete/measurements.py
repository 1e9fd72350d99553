"""Background normalization, observation masks and noise injection for DtN matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _io
from ._rng import as_generator

GUARD_REL = 1e-14
MASK_KINDS = ("principal", "random", "hierarchical", "full", "custom")


def _guard(background):
    background = np.asarray(background, float)
    return np.abs(background) < GUARD_REL * np.max(np.abs(background))


def normalize(raw, background) -> np.ndarray:
    """Hadamard ratio ``raw / background``.

    Entries where the background is below ``1e-14 * max|background|`` are set to 1.
    Works on a single matrix or a stack ``(..., N_B, N_B)``.
    """
    raw = np.asarray(raw, float)
    background = np.asarray(background, float)
    if raw.shape[-2:] != background.shape:
        raise ValueError(f"shape mismatch: {raw.shape} vs background {background.shape}")
    g = _guard(background)
    safe = np.where(g, 1.0, background)
    return np.where(g, 1.0, raw / safe)


def denormalize(normalized, background) -> np.ndarray:
    """Inverse of :func:`normalize` (guarded entries map back to the background)."""
    normalized = np.asarray(normalized, float)
    background = np.asarray(background, float)
    if normalized.shape[-2:] != background.shape:
        raise ValueError(f"shape mismatch: {normalized.shape} vs background {background.shape}")
    return normalized * background


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary observation pattern over an ``N_B x N_B`` DtN matrix."""

    bits: np.ndarray
    kind: str
    rate: float
    seed: int | None = None
    level: int | None = None
    index_set: np.ndarray | None = None

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"mask must be square, got shape {b.shape}")
        object.__setattr__(self, "bits", b.astype(bool))
        if self.kind not in MASK_KINDS:
            raise ValueError(f"unknown mask kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def n_observed(self) -> int:
        return int(self.bits.sum())

    @property
    def realized_rate(self) -> float:
        return self.n_observed / self.bits.size

    def __array__(self, dtype=None, copy=None):
        return self.bits.astype(dtype if dtype is not None else float)

    def to_bytes(self) -> bytes:
        meta = {"kind": self.kind, "rate": self.rate, "seed": self.seed, "level": self.level, "n": self.n}
        return _io.dumps("mask", {"bits": np.packbits(self.bits, axis=1)}, meta)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Mask":
        arrays, meta = _io.loads(data, kind="mask")
        bits = np.unpackbits(arrays["bits"], axis=1, count=meta["n"]).astype(bool)
        return cls(bits, meta["kind"], meta["rate"], meta["seed"], meta["level"])


def principal_size(n: int, s: float) -> int:
    return int(np.floor(np.sqrt(s) * n + 1e-12))


def mask_principal(n: int, s: float, rng_seed=None) -> Mask:
    """Observe the principal submatrix on ``floor(sqrt(s) * n)`` random nodes."""
    if not 0 < s <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {s}")
    k = principal_size(n, s)
    if k == 0:
        raise ValueError(f"rate {s} selects no nodes for N_B={n}")
    rng = as_generator(rng_seed)
    S = np.sort(rng.choice(n, size=k, replace=False))
    bits = np.zeros((n, n), bool)
    bits[np.ix_(S, S)] = True
    return Mask(bits, "principal", float(s), _seed_of(rng_seed), index_set=S)


def mask_random(n: int, s: float, rng_seed=None) -> Mask:
    """I.i.d. Bernoulli(s) entries."""
    if not 0 <= s <= 1:
        raise ValueError(f"rate must lie in [0, 1], got {s}")
    rng = as_generator(rng_seed)
    bits = rng.random((n, n)) < s
    return Mask(bits, "random", float(s), _seed_of(rng_seed))


def mask_hierarchical(n: int, level: int, s_offdiag: float, rng_seed=None, symmetric: bool = False) -> Mask:
    """Dyadic hierarchical pattern.

    The ``2**level`` finest diagonal blocks are fully observed; every off-diagonal
    block of the partition is Bernoulli(``s_offdiag``)-sampled. With
    ``symmetric=True`` the lower blocks mirror the upper ones.
    """
    from .lowrank import partition

    part = partition(n, level)
    rng = as_generator(rng_seed)
    bits = np.zeros((n, n), bool)
    for rows, cols in part.diagonal:
        bits[rows[0] : rows[1], cols[0] : cols[1]] = True
    for blk in part.offdiagonal:
        (r0, r1), (c0, c1) = blk.rows, blk.cols
        if symmetric and r0 > c0:
            continue
        sub = rng.random((r1 - r0, c1 - c0)) < s_offdiag
        bits[r0:r1, c0:c1] = sub
        if symmetric:
            bits[c0:c1, r0:r1] = sub.T
    return Mask(bits, "hierarchical", float(s_offdiag), _seed_of(rng_seed), level=int(level))


def hierarchical_expected_rate(n: int, level: int, s_offdiag: float) -> float:
    diag = n * n // (2**level)
    return (diag + s_offdiag * (n * n - diag)) / (n * n)


def full_mask(n: int) -> Mask:
    return Mask(np.ones((n, n), bool), "full", 1.0)


def apply_mask(X, M) -> np.ndarray:
    """Hadamard product with a binary mask (``Mask`` or array)."""
    bits = M.bits if isinstance(M, Mask) else np.asarray(M)
    X = np.asarray(X, float)
    if X.shape[-2:] != bits.shape[-2:]:
        raise ValueError(f"shape mismatch: {X.shape} vs mask {bits.shape}")
    return X * bits


def inject_noise(raw, background, sigma: float, rng_seed=None) -> np.ndarray:
    """``raw + sigma * background * E`` with ``E`` i.i.d. standard normal."""
    if not 0 <= sigma < 1:
        raise ValueError(f"sigma must lie in [0, 1), got {sigma}")
    raw = np.asarray(raw, float)
    if sigma == 0:
        return raw.copy()
    rng = as_generator(rng_seed)
    E = rng.standard_normal(raw.shape)
    return raw + sigma * np.asarray(background, float) * E


def _seed_of(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None
