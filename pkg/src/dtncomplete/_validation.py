"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def check_dtn_stack(X, name: str = "X") -> np.ndarray:
    """Coerce to a float64 stack of square matrices, shape ``(n, N_B, N_B)``.

    A single matrix is promoted to a stack of one.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise ValueError(f"{name} must be (n, N_B, N_B) or (N_B, N_B), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_mask_stack(masks, shape) -> np.ndarray:
    """Boolean mask stack broadcast against a DtN stack of ``shape``.

    Accepts a single mask (``Mask`` or array), a list of them, or an array stack.
    """
    if masks is None:
        raise ValueError("masks are required")
    if hasattr(masks, "bits"):
        masks = masks.bits
    elif isinstance(masks, (list, tuple)):
        masks = np.stack([np.asarray(getattr(m, "bits", m)) for m in masks])
    m = np.asarray(masks).astype(bool)
    if m.ndim == 2:
        m = np.broadcast_to(m, shape)
    if m.shape != tuple(shape):
        raise ValueError(f"mask shape {m.shape} does not match data shape {tuple(shape)}")
    return m


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
