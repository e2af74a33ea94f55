"""
Seed derivation shared by every stochastic step of the pipeline.

All randomness flows from one master seed through numpy's SeedSequence, which
hashes (master_seed, *keys) into independent, platform-stable streams. A
stream therefore depends only on its keys, never on the order or thread in
which it is requested.
"""

import numpy as np

# Stream namespaces keep e.g. walk (v, k) and repeat r from colliding.
WALK_STREAM = 1
SPLIT_STREAM = 2
SUBSAMPLE_STREAM = 3
TRAIN_STREAM = 4
REPEAT_STREAM = 5
PROJECTION_STREAM = 6
SYNTHETIC_STREAM = 7


class SeedHelper:
    @staticmethod
    def sequence(master_seed: int, *keys: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(master_seed) % 2**64, spawn_key=tuple(int(k) for k in keys))

    @staticmethod
    def rng(master_seed: int, *keys: int) -> np.random.Generator:
        """Generator for the stream identified by (master_seed, *keys)"""
        return np.random.Generator(np.random.PCG64(SeedHelper.sequence(master_seed, *keys)))

    @staticmethod
    def derive_seed(master_seed: int, *keys: int) -> int:
        """64-bit child seed for the stream identified by (master_seed, *keys)"""
        state = SeedHelper.sequence(master_seed, *keys).generate_state(1, np.uint64)
        return int(state[0])
