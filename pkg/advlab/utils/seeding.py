"""
advlab - RNG stream derivation
Every sampling task gets its own PCG64 stream keyed by (master_seed, *task_key)
"""

import zlib
from typing import Union

import numpy as np

TaskKey = Union[int, str]


def _key_word(part: TaskKey) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"task key entries must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed_sequence(master_seed: int, *task_key: TaskKey) -> np.random.SeedSequence:
    """SeedSequence([master_seed, *task_key]) with string keys hashed to 32-bit words"""
    return np.random.SeedSequence([int(master_seed)] + [_key_word(k) for k in task_key])


def derive_rng(master_seed: int, *task_key: TaskKey) -> np.random.Generator:
    """Independent generator for one task; identical keys give identical streams"""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, *task_key)))
