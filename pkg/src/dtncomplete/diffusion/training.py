"""Conditional score-matching training loop."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .. import measurements
from .schedule import NoiseSchedule

log = logging.getLogger(__name__)

WEIGHTINGS = ("unit", "noise")


class DivergenceError(FloatingPointError):
    """Training loss became NaN or infinite."""


@dataclass(frozen=True)
class MaskDistribution:
    """Distribution over observation masks used to form training conditions.

    ``kind`` is one of ``principal``, ``random``, ``hierarchical``, ``full`` or
    ``empty``; each draw picks a rate uniformly from ``rates``.
    """

    kind: str = "principal"
    rates: tuple = (0.01,)
    level: int = 3

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "full":
            return np.ones((n, n), bool)
        if self.kind == "empty":
            return np.zeros((n, n), bool)
        s = float(self.rates[rng.integers(len(self.rates))])
        if self.kind == "principal":
            return measurements.mask_principal(n, s, rng).bits
        if self.kind == "random":
            return measurements.mask_random(n, s, rng).bits
        if self.kind == "hierarchical":
            return measurements.mask_hierarchical(n, self.level, s, rng).bits
        raise ValueError(f"unknown mask kind {self.kind!r}")

    def to_meta(self) -> dict:
        return {"kind": self.kind, "rates": list(self.rates), "level": self.level}


def make_condition(x0, masks) -> torch.Tensor:
    """Stack ``(mask * x0, mask)`` as two channels, shape ``(B, 2, n, n)``."""
    x0 = torch.as_tensor(x0)
    m = torch.as_tensor(np.array(masks, dtype=np.float64), dtype=x0.dtype)
    if m.ndim == 2:
        m = m.expand_as(x0)
    return torch.stack([m * x0, m], dim=1)


def score_matching_loss(model, x0, cond, t, noise, alpha_bar, weighting: str = "noise") -> torch.Tensor:
    """Batch mean of ``lambda(t) * mean_coords (s_theta(x_t, z, t) - s*)^2``.

    ``weighting="unit"`` uses ``lambda = 1``; ``"noise"`` uses ``lambda = 1 - abar_t``,
    which turns the objective into plain noise regression.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    ab = torch.as_tensor(alpha_bar, dtype=x0.dtype)[t - 1]
    shp = (-1,) + (1,) * (x0.ndim - 1)
    ab = ab.reshape(shp)
    x_t = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise
    target = -(x_t - torch.sqrt(ab) * x0) / (1.0 - ab)
    s = model(x_t, cond, t)
    per = ((s - target) ** 2).reshape(x0.shape[0], -1).mean(dim=1)
    if weighting == "noise":
        per = per * (1.0 - ab.reshape(-1))
    return per.mean()


@dataclass
class TrainResult:
    model: torch.nn.Module
    ema_model: torch.nn.Module
    loss_trace: list = field(default_factory=list)
    heldout_initial: float | None = None
    heldout_final: float | None = None


class _HeldOut:
    """Fixed draws of (t, noise, masks) so held-out losses are comparable across steps."""

    def __init__(self, data, schedule, mask_distribution, rng, weighting):
        self.x0 = torch.as_tensor(data)
        n = len(data)
        self.t = torch.as_tensor(rng.integers(1, schedule.T + 1, size=n))
        self.noise = torch.as_tensor(rng.standard_normal(data.shape), dtype=self.x0.dtype)
        self.cond = None
        if mask_distribution is not None:
            masks = np.stack([mask_distribution.sample(rng, data.shape[-1]) for _ in range(n)])
            self.cond = make_condition(self.x0, masks)
        self.alpha_bar = schedule.alpha_bar
        self.weighting = weighting

    @torch.no_grad()
    def __call__(self, model) -> float:
        return float(score_matching_loss(model, self.x0, self.cond, self.t, self.noise, self.alpha_bar, self.weighting))


def train(
    model: torch.nn.Module,
    data,
    schedule: NoiseSchedule,
    *,
    mask_distribution: MaskDistribution | None = None,
    steps: int = 1000,
    batch_size: int = 32,
    lr: float = 1e-4,
    weight_decay: float = 0.0,
    ema_decay: float = 0.999,
    weighting: str = "noise",
    seed: int = 0,
    heldout=None,
    log_every: int = 0,
) -> TrainResult:
    """Fit ``model`` by conditional score matching.

    Parameters
    ----------
    data : array, shape (n_samples, *sample_shape)
        Training targets ``x0`` (float32 or float64; the model's dtype is used).
    mask_distribution : MaskDistribution or None
        Source of observation masks. ``None`` trains an unconditional model
        (``cond`` is passed as None).
    heldout : array or None
        Optional held-out targets evaluated before and after training with
        fixed noise draws.

    Raises
    ------
    DivergenceError
        If a batch loss is not finite.
    """
    dtype = next(model.parameters()).dtype
    data = np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(seed)
    torch.manual_seed(int(rng.integers(2**31)))
    ab = schedule.alpha_bar
    opt = torch.optim.AdamW(model.parameters(), lr=lr, weight_decay=weight_decay)
    ema = copy.deepcopy(model).requires_grad_(False)

    ho = None
    result = TrainResult(model, ema)
    if heldout is not None:
        ho = _HeldOut(np.asarray(heldout, np.float64).astype(_np_dtype(dtype)), schedule, mask_distribution,
                      np.random.default_rng(rng.integers(2**63)), weighting)
        result.heldout_initial = ho(model)

    n = len(data)
    model.train()
    for step in range(1, steps + 1):
        idx = rng.integers(n, size=batch_size)
        x0 = torch.as_tensor(data[idx], dtype=dtype)
        cond = None
        if mask_distribution is not None:
            masks = np.stack([mask_distribution.sample(rng, data.shape[-1]) for _ in range(batch_size)])
            cond = make_condition(x0, masks)
        t = torch.as_tensor(rng.integers(1, schedule.T + 1, size=batch_size))
        noise = torch.as_tensor(rng.standard_normal(x0.shape), dtype=dtype)
        loss = score_matching_loss(model, x0, cond, t, noise, ab, weighting)
        if not torch.isfinite(loss):
            raise DivergenceError(f"loss is {loss.item()} at step {step}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        # warmup keeps short runs from averaging in the initialization
        decay = min(ema_decay, (1.0 + step) / (10.0 + step))
        with torch.no_grad():
            for pe, pm in zip(ema.parameters(), model.parameters()):
                pe.mul_(decay).add_(pm, alpha=1.0 - decay)
        result.loss_trace.append((step, loss.item()))
        if log_every and step % log_every == 0:
            recent = np.mean([v for _, v in result.loss_trace[-log_every:]])
            log.info("step %d loss %.4g", step, recent)
    model.eval()
    ema.eval()
    if ho is not None:
        result.heldout_final = ho(ema)
    return result


def _np_dtype(torch_dtype):
    return np.float64 if torch_dtype == torch.float64 else np.float32


def write_loss_csv(path, loss_trace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in loss_trace:
            fh.write(f"{step},{loss:.9g}\n")
