"""Checkpoint files for score models.

One container (see ``dtncomplete._io``) holding the architecture descriptor,
schedule parameters, the live and EMA parameter tensors, and any extra arrays
(for instance data standardization statistics).
"""

from __future__ import annotations

import numpy as np
import torch

from .. import _io
from .network import build_model
from .schedule import NoiseSchedule, make_schedule

KIND = "score-checkpoint"
CHECKPOINT_VERSION = 1


def _state_arrays(prefix, module):
    return {f"{prefix}/{k}": v.detach().cpu().numpy() for k, v in module.state_dict().items() if k != "alpha_bar"}


def save_checkpoint(path, model, ema_model, schedule: NoiseSchedule, *, extra_arrays=None, meta=None, manifest_hash: str = "") -> None:
    arrays = {**_state_arrays("theta", model), **_state_arrays("ema", ema_model)}
    for k, v in (extra_arrays or {}).items():
        arrays[f"extra/{k}"] = np.asarray(v)
    header = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "descriptor": model.descriptor(),
        "schedule": schedule.to_meta(),
        "manifest_hash": manifest_hash,
        "dtype": str(next(model.parameters()).dtype).replace("torch.", ""),
        "extra": meta or {},
    }
    _io.save(path, KIND, arrays, header)


def load_checkpoint(path):
    """Return ``(model, ema_model, schedule, extra_arrays, header)``."""
    arrays, header = _io.load(path, KIND)
    if header.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise _io.FormatError(f"unsupported checkpoint version {header.get('checkpoint_version')}")
    sm = header["schedule"]
    schedule = make_schedule(sm["T"], sm["beta_min"], sm["beta_max"])
    dtype = getattr(torch, header.get("dtype", "float32"))
    models = []
    for prefix in ("theta", "ema"):
        m = build_model(header["descriptor"], schedule.alpha_bar).to(dtype)
        state = {k.split("/", 1)[1]: torch.as_tensor(v) for k, v in arrays.items() if k.startswith(prefix + "/")}
        state["alpha_bar"] = m.alpha_bar
        m.load_state_dict(state)
        m.eval()
        models.append(m)
    extra = {k.split("/", 1)[1]: v for k, v in arrays.items() if k.startswith("extra/")}
    return models[0], models[1], schedule, extra, header
