"""Conditional denoising diffusion model for DtN matrix completion."""

from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import DiffusionCompleter
from .network import ConvScoreNet, LinearScore, build_model
from .sampling import complete, ddpm_sample, posterior_mean
from .schedule import (
    NoiseSchedule,
    analytic_score_target,
    desk_schedule,
    forward_noise,
    make_schedule,
    paper_schedule,
)
from .training import DivergenceError, MaskDistribution, make_condition, score_matching_loss, train, write_loss_csv

__all__ = [
    "ConvScoreNet",
    "DiffusionCompleter",
    "DivergenceError",
    "LinearScore",
    "MaskDistribution",
    "NoiseSchedule",
    "analytic_score_target",
    "build_model",
    "complete",
    "ddpm_sample",
    "desk_schedule",
    "forward_noise",
    "load_checkpoint",
    "make_condition",
    "make_schedule",
    "paper_schedule",
    "posterior_mean",
    "save_checkpoint",
    "score_matching_loss",
    "train",
    "write_loss_csv",
]
