"""Conditional DDPM sampling."""

from __future__ import annotations

import numpy as np
import torch

from .schedule import NoiseSchedule
from .training import make_condition


@torch.no_grad()
def ddpm_sample(score_fn, shape, schedule: NoiseSchedule, rng=None, stochastic: bool = True, dtype=torch.float32):
    """Run the reverse chain from ``Y_T ~ N(0, I)`` down to ``Y_0``.

    ``score_fn(y, t)`` receives a tensor of shape ``shape`` and an integer step
    tensor (one entry per leading-axis sample). Each step applies
    ``Y_{t-1} = (Y_t + (1 - alpha_t) s + sigma_t W_t) / sqrt(alpha_t)``; with
    ``stochastic=False`` every ``W_t`` is zero.
    """
    rng = np.random.default_rng(rng)
    alpha = schedule.alpha
    sigma = schedule.sigma
    y = torch.as_tensor(rng.standard_normal(shape), dtype=dtype)
    B = shape[0]
    for t in range(schedule.T, 0, -1):
        a, sg = float(alpha[t - 1]), float(sigma[t - 1])
        s = score_fn(y, torch.full((B,), t, dtype=torch.long))
        w = torch.as_tensor(rng.standard_normal(shape), dtype=dtype) if stochastic else 0.0
        y = (y + (1.0 - a) * s + sg * w) / np.sqrt(a)
    return y


def _model_dtype(model):
    return next(model.parameters()).dtype


def complete(observed, mask, model, schedule: NoiseSchedule, rng=None, stochastic: bool = True) -> np.ndarray:
    """Sample completions for a batch of observed matrices.

    Parameters
    ----------
    observed : array, shape (B, n, n) or (n, n)
        Observed values in the model's (standardized) coordinates; unobserved
        entries are ignored.
    mask : array, same shape as ``observed`` (or a single ``(n, n)`` mask)
    """
    observed = np.asarray(observed, dtype=np.float64)
    single = observed.ndim == 2
    if single:
        observed = observed[None]
    n = getattr(model, "n", None)
    if n is not None and observed.shape[-1] != n:
        raise ValueError(f"model was trained for N_B={n}, got matrices of size {observed.shape[-1]}")
    bits = np.asarray(getattr(mask, "bits", mask), bool)
    if bits.shape[-2:] != observed.shape[-2:]:
        raise ValueError(f"mask shape {bits.shape} does not match observations {observed.shape}")
    dtype = _model_dtype(model)
    masks = np.broadcast_to(bits, observed.shape)
    cond = make_condition(torch.as_tensor(np.where(masks, observed, 0.0), dtype=dtype), masks)
    y = ddpm_sample(lambda y, t: model(y, cond, t), observed.shape, schedule, rng, stochastic, dtype)
    out = y.double().numpy()
    return out[0] if single else out


def posterior_mean(observed, mask, model, schedule: NoiseSchedule, n_samples: int = 8, rng=None) -> np.ndarray:
    """Coordinatewise mean of ``n_samples`` independent completions."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    observed = np.asarray(observed, dtype=np.float64)
    single = observed.ndim == 2
    if single:
        observed = observed[None]
    bits = np.asarray(getattr(mask, "bits", mask), bool)
    masks = np.broadcast_to(bits, observed.shape)
    B = observed.shape[0]
    # all draws run as one batch: sample k of matrix i sits at row k * B + i
    rep_obs = np.tile(observed, (n_samples, 1, 1))
    rep_mask = np.tile(masks, (n_samples, 1, 1))
    draws = complete(rep_obs, rep_mask, model, schedule, rng)
    out = draws.reshape(n_samples, B, *observed.shape[1:]).mean(axis=0)
    return out[0] if single else out
