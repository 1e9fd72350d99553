"""Score networks.

Every model maps ``(x_t, cond, t)`` to a score estimate of the same shape as
``x_t``; ``t`` is an integer tensor of steps in ``1..T``.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of integer steps, shape ``(B, dim)``."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = t.to(torch.float64)[:, None] * freqs[None]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=1)
    if dim % 2:
        emb = F.pad(emb, (0, 1))
    return emb


def _groups(c: int) -> int:
    for g in (8, 4, 2):
        if c % g == 0:
            return g
    return 1


class ResBlock(nn.Module):
    def __init__(self, cin: int, cout: int, emb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(cin), cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.emb = nn.Linear(emb_dim, cout)
        self.norm2 = nn.GroupNorm(_groups(cout), cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.emb(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class ConvScoreNet(nn.Module):
    """Small convolutional encoder-decoder with additive time embedding.

    Input channels are ``(x_t, masked values, mask bits)``; the network predicts
    the injected noise ``eps`` and returns the score ``-eps / sqrt(1 - abar_t)``.
    """

    def __init__(self, n: int, alpha_bar, width: int = 16, levels: int = 2, cond_channels: int = 2, emb_dim: int = 64):
        super().__init__()
        if n % (2**levels):
            raise ValueError(f"grid size {n} is not divisible by 2**{levels}")
        self.n, self.width, self.levels = int(n), int(width), int(levels)
        self.cond_channels, self.emb_dim = int(cond_channels), int(emb_dim)
        self.register_buffer("alpha_bar", torch.as_tensor(np.asarray(alpha_bar), dtype=torch.float32))
        self.temb = nn.Sequential(nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim))
        chans = [width * 2**i for i in range(levels + 1)]
        self.inp = nn.Conv2d(1 + cond_channels, width, 3, padding=1)
        self.down = nn.ModuleList()
        self.pool = nn.ModuleList()
        for i in range(levels):
            self.down.append(ResBlock(chans[i], chans[i], emb_dim))
            self.pool.append(nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1))
        self.mid = ResBlock(chans[-1], chans[-1], emb_dim)
        self.upconv = nn.ModuleList()
        self.up = nn.ModuleList()
        for i in reversed(range(levels)):
            self.upconv.append(nn.Conv2d(chans[i + 1], chans[i], 3, padding=1))
            self.up.append(ResBlock(2 * chans[i], chans[i], emb_dim))
        self.out_norm = nn.GroupNorm(_groups(width), width)
        self.out = nn.Conv2d(width, 1, 3, padding=1)

    def descriptor(self) -> dict:
        return {"kind": "conv", "n": self.n, "width": self.width, "levels": self.levels,
                "cond_channels": self.cond_channels, "emb_dim": self.emb_dim}

    def predict_eps(self, x, cond, t):
        B = x.shape[0]
        h = x.reshape(B, 1, self.n, self.n)
        if self.cond_channels:
            if cond is None:
                cond = torch.zeros(B, self.cond_channels, self.n, self.n, dtype=x.dtype, device=x.device)
            h = torch.cat([h, cond], dim=1)
        emb = self.temb(timestep_embedding(t, self.emb_dim).to(x.dtype))
        h = self.inp(h)
        skips = []
        for blk, pool in zip(self.down, self.pool):
            h = blk(h, emb)
            skips.append(h)
            h = pool(h)
        h = self.mid(h, emb)
        for conv, blk in zip(self.upconv, self.up):
            h = conv(F.interpolate(h, scale_factor=2, mode="nearest"))
            h = blk(torch.cat([h, skips.pop()], dim=1), emb)
        return self.out(F.silu(self.out_norm(h))).reshape(x.shape)

    def forward(self, x, cond, t):
        ab = self.alpha_bar.to(x.dtype)[t - 1]
        scale = torch.rsqrt(1.0 - ab).reshape((-1,) + (1,) * (x.ndim - 1))
        return -scale * self.predict_eps(x, cond, t)


class LinearScore(nn.Module):
    """``s(x, t) = W x + sqrt(abar_t) b``; exact family for a unit-covariance Gaussian target.

    For ``x0 ~ N(mu, I)`` the true marginal score is ``-(x - sqrt(abar_t) mu)``,
    reached at ``W = -I`` and ``b = mu``.
    """

    def __init__(self, d: int, alpha_bar):
        super().__init__()
        self.d = int(d)
        self.register_buffer("alpha_bar", torch.as_tensor(np.asarray(alpha_bar), dtype=torch.float64))
        self.W = nn.Parameter(torch.zeros(d, d, dtype=torch.float64))
        self.b = nn.Parameter(torch.zeros(d, dtype=torch.float64))

    def descriptor(self) -> dict:
        return {"kind": "linear", "d": self.d}

    def forward(self, x, cond, t):
        ab = self.alpha_bar.to(x.dtype)[t - 1]
        return x @ self.W.T + torch.sqrt(ab)[:, None] * self.b


def build_model(descriptor: dict, alpha_bar) -> nn.Module:
    kind = descriptor.get("kind")
    if kind == "conv":
        kw = {k: descriptor[k] for k in ("width", "levels", "cond_channels", "emb_dim") if k in descriptor}
        return ConvScoreNet(descriptor["n"], alpha_bar, **kw)
    if kind == "linear":
        return LinearScore(descriptor["d"], alpha_bar)
    raise ValueError(f"unknown model kind {kind!r}")


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
