"""Counter-based seed splitting.

Each pipeline stage gets its own stream, addressed by ``(master, stage, index)``,
so any single sample of any stage can be regenerated in isolation.
"""

import zlib

import numpy as np

STAGES = ("phantom", "mask", "noise", "train", "sample", "split", "theory")


def _stage_id(stage):
    if isinstance(stage, int):
        return stage
    return zlib.crc32(stage.encode("ascii"))


def stream(master: int, stage, index: int = 0) -> np.random.Generator:
    """Independent generator for ``(master, stage, index)``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(_stage_id(stage), int(index)))
    return np.random.default_rng(ss)


def child_seed(master: int, stage, index: int = 0) -> int:
    """A 63-bit integer seed derived from the same address (for torch, records)."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(_stage_id(stage), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
