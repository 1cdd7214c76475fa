"""Seeded, splittable random streams.

Every trial gets its own PCG64 stream derived as child(master_seed, trial_index),
so results do not depend on scheduling or worker count.
"""
import os

import numpy as np

SEED_ENV = "TCL_SEED"


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream at ``path`` below ``seed`` (an empty path is the root)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def child(seed: int, trial: int) -> np.random.Generator:
    return make_rng(seed, trial)


def resolve_seed(seed: int | None) -> int | None:
    """``TCL_SEED`` from the environment overrides any explicit seed."""
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env)
    return seed
