"""Scikit-learn style front end for diffusion completion of normalized DtN matrices."""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_dtn_stack, check_mask_stack
from .checkpoint import load_checkpoint, save_checkpoint
from .network import ConvScoreNet
from .sampling import complete, posterior_mean
from .schedule import make_schedule
from .training import MaskDistribution, train


class DiffusionCompleter(BaseEstimator):
    """Conditional diffusion model that completes masked DtN matrices.

    ``fit`` learns from fully observed normalized matrices; ``predict`` returns
    the posterior mean of ``n_samples`` conditional samples; ``sample`` returns
    the individual draws. Data are standardized internally with the per-entry
    training mean and one global scale, so the network sees roughly unit-variance
    inputs.

    Parameters
    ----------
    mask_kind, mask_rates : str, tuple of float
        Training mask distribution (see :class:`MaskDistribution`).
    T, beta_min, beta_max : int, float, float
        Linear noise schedule.
    width, levels, emb_dim : int
        Score network size.
    steps, batch_size, lr, weight_decay, ema_decay, weighting :
        Optimizer settings forwarded to :func:`train`.
    n_samples : int
        Posterior draws averaged by ``predict``.
    random_state : int
        Seeds initialization, training draws and sampling.
    """

    def __init__(
        self,
        mask_kind: str = "principal",
        mask_rates=(0.01,),
        T: int = 200,
        beta_min: float = 1e-4,
        beta_max: float = 0.1,
        width: int = 16,
        levels: int = 2,
        emb_dim: int = 64,
        steps: int = 3000,
        batch_size: int = 32,
        lr: float = 1e-4,
        weight_decay: float = 0.0,
        ema_decay: float = 0.999,
        weighting: str = "noise",
        n_samples: int = 8,
        standardize: str = "global",
        random_state: int = 0,
    ):
        self.mask_kind = mask_kind
        self.mask_rates = mask_rates
        self.T = T
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.width = width
        self.levels = levels
        self.emb_dim = emb_dim
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.ema_decay = ema_decay
        self.weighting = weighting
        self.n_samples = n_samples
        self.standardize = standardize
        self.random_state = random_state

    # ------------------------------------------------------------------
    def _standardize(self, X):
        return (X - self.mean_) / self.scale_

    def _unstandardize(self, Z):
        return Z * self.scale_ + self.mean_

    def fit(self, X, y=None, heldout=None):
        """Train on a stack of fully observed normalized DtN matrices."""
        X = check_dtn_stack(X)
        self.n_boundary_ = X.shape[-1]
        self.mean_ = X.mean(axis=0)
        if self.standardize == "entry":
            self.scale_ = np.maximum(X.std(axis=0), 1e-12)
        elif self.standardize == "global":
            self.scale_ = float(np.std(X - self.mean_)) or 1.0
        else:
            raise ValueError(f"standardize must be 'global' or 'entry', got {self.standardize!r}")
        self.schedule_ = make_schedule(self.T, self.beta_min, self.beta_max)
        torch.manual_seed(self.random_state)
        model = ConvScoreNet(self.n_boundary_, self.schedule_.alpha_bar, self.width, self.levels, 2, self.emb_dim)
        dist = MaskDistribution(self.mask_kind, tuple(np.atleast_1d(self.mask_rates).tolist()))
        res = train(
            model,
            self._standardize(X),
            self.schedule_,
            mask_distribution=dist,
            steps=self.steps,
            batch_size=self.batch_size,
            lr=self.lr,
            weight_decay=self.weight_decay,
            ema_decay=self.ema_decay,
            weighting=self.weighting,
            seed=self.random_state,
            heldout=None if heldout is None else self._standardize(check_dtn_stack(heldout)),
        )
        self.model_ = res.model
        self.ema_model_ = res.ema_model
        self.loss_trace_ = res.loss_trace
        self.heldout_loss_ = (res.heldout_initial, res.heldout_final)
        return self

    def _prepare(self, observed, masks):
        check_is_fitted(self, "ema_model_")
        observed = check_dtn_stack(observed, "observed")
        if observed.shape[-1] != self.n_boundary_:
            raise ValueError(f"model was trained for N_B={self.n_boundary_}, got {observed.shape[-1]}")
        masks = check_mask_stack(masks, observed.shape)
        return self._standardize(observed), masks

    def sample(self, observed, masks, n_samples: int = 1, random_state=None) -> np.ndarray:
        """Independent completions, shape ``(n_samples, n, N_B, N_B)``."""
        Z, M = self._prepare(observed, masks)
        rs = self.random_state if random_state is None else random_state
        reps = complete(np.tile(Z, (n_samples, 1, 1)), np.tile(M, (n_samples, 1, 1)), self.ema_model_, self.schedule_, rs)
        return self._unstandardize(reps.reshape(n_samples, *Z.shape))

    def predict(self, observed, masks, random_state=None) -> np.ndarray:
        """Posterior-mean completion of each observed matrix."""
        Z, M = self._prepare(observed, masks)
        rs = self.random_state if random_state is None else random_state
        return self._unstandardize(posterior_mean(Z, M, self.ema_model_, self.schedule_, self.n_samples, rs))

    # ------------------------------------------------------------------
    def save(self, path, manifest_hash: str = "") -> None:
        check_is_fitted(self, "ema_model_")
        save_checkpoint(
            path, self.model_, self.ema_model_, self.schedule_,
            extra_arrays={"mean": self.mean_, "scale": np.atleast_1d(self.scale_)},
            meta={"params": _jsonable(self.get_params())},
            manifest_hash=manifest_hash,
        )

    @classmethod
    def load(cls, path) -> "DiffusionCompleter":
        model, ema, schedule, extra, header = load_checkpoint(path)
        est = cls(**header["extra"]["params"])
        est.model_, est.ema_model_, est.schedule_ = model, ema, schedule
        est.mean_ = extra["mean"]
        sc = extra["scale"]
        est.scale_ = float(sc[0]) if sc.size == 1 else sc
        est.n_boundary_ = est.mean_.shape[-1]
        est.loss_trace_ = []
        est.manifest_hash_ = header.get("manifest_hash", "")
        return est


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, (tuple, np.ndarray)):
            v = list(np.asarray(v).tolist())
        out[k] = v
    return out
