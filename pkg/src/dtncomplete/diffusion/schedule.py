"""Variance-preserving noise schedule and the closed-form forward process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALPHA_BAR_T_MAX = 1e-3


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Discrete DDPM schedule indexed by ``t = 1..T``.

    Arrays are stored 0-based: ``alpha[t - 1]`` is ``alpha_t``.
    """

    alpha: np.ndarray
    beta_min: float | None = None
    beta_max: float | None = None

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("alpha must be a non-empty 1-d array")
        if np.any(a <= 0) or np.any(a > 1):
            raise ValueError("alpha_t must lie in (0, 1]")
        object.__setattr__(self, "alpha", a)

    @property
    def T(self) -> int:
        return self.alpha.size

    @property
    def beta(self) -> np.ndarray:
        return 1.0 - self.alpha

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    @property
    def sigma(self) -> np.ndarray:
        """``sigma_t = sqrt((alpha_t - abar_t)(1 - alpha_t) / (1 - abar_t))``; 0 at ``t = 1``."""
        a, ab = self.alpha, self.alpha_bar
        num = (a - ab) * (1.0 - a)
        den = 1.0 - ab
        out = np.zeros_like(a)
        ok = den > 0
        out[ok] = np.sqrt(np.maximum(num[ok], 0.0) / den[ok])
        return out

    def check(self) -> "NoiseSchedule":
        ab = self.alpha_bar
        if not ab[-1] < ALPHA_BAR_T_MAX:
            raise ValueError(f"alpha_bar_T = {ab[-1]:.3g} is not below {ALPHA_BAR_T_MAX}")
        return self

    def to_meta(self) -> dict:
        return {"T": self.T, "beta_min": self.beta_min, "beta_max": self.beta_max}


def make_schedule(T: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    """Linear-beta schedule; rejects configurations that do not end near pure noise."""
    if T < 10:
        raise ValueError(f"T must be at least 10, got {T}")
    if not 0 < beta_min < beta_max < 1:
        raise ValueError(f"need 0 < beta_min < beta_max < 1, got ({beta_min}, {beta_max})")
    beta = np.linspace(beta_min, beta_max, int(T))
    return NoiseSchedule(1.0 - beta, float(beta_min), float(beta_max)).check()


def paper_schedule() -> NoiseSchedule:
    return make_schedule(1000, 1e-4, 0.02)


def desk_schedule() -> NoiseSchedule:
    return make_schedule(200, 1e-4, 0.1)


def _coef(schedule: NoiseSchedule, t):
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > schedule.T):
        raise ValueError(f"t must lie in 1..{schedule.T}")
    return schedule.alpha_bar[t - 1]


def forward_noise(x0, t, schedule: NoiseSchedule, rng=None, noise=None):
    """``x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) w``.

    ``t`` is a scalar or one step per leading-axis sample. Returns ``(x_t, w)``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    ab = _coef(schedule, t)
    ab = np.reshape(ab, np.shape(ab) + (1,) * (x0.ndim - np.ndim(ab)))
    if noise is None:
        noise = np.random.default_rng(rng).standard_normal(x0.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise, noise


def analytic_score_target(x_t, x0, t, schedule: NoiseSchedule):
    """Score of ``p(x_t | x0)``: ``-(x_t - sqrt(abar_t) x0) / (1 - abar_t)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    ab = _coef(schedule, t)
    ab = np.reshape(ab, np.shape(ab) + (1,) * (x_t.ndim - np.ndim(ab)))
    return -(x_t - np.sqrt(ab) * np.asarray(x0, dtype=np.float64)) / (1.0 - ab)
