"""
Reproducible random streams.

A stream is addressed by (master seed, stream index, channel). The triple is fed to
numpy's SeedSequence as entropy plus spawn key, so streams are split by hashing and
never overlap in practice. Channel 0 drives the path itself; other channels carry
auxiliary randomness (Meyer clocks, randomised quadrature) so that switching those
features on or off leaves the base path untouched.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

MASTER_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    index: int
    channel: int = 0

    def __post_init__(self):
        if self.index < 0 or self.channel < 0:
            raise ValueError("stream index and channel must be nonnegative")

    def seed_sequence(self):
        return np.random.SeedSequence(
            entropy=self.master_seed & MASTER_SEED_MASK,
            spawn_key=(self.channel, self.index),
        )

    def generator(self):
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, channel):
        return replace(self, channel=channel)

    def provenance(self):
        return {'seed': self.master_seed, 'stream': self.index, 'channel': self.channel}


def default_workers():
    env = os.environ.get('JUMPLAB_WORKERS')
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SamplingPlan:
    """
    How a Monte Carlo run is split into streams.

    Paths are cut into consecutive blocks of `block_size`; block b uses stream index
    `offset + b`. Changing n_paths or block_size therefore changes the assignment.
    """
    master_seed: int = 20240601
    block_size: int = 1000
    workers: int = 1
    confidence: float = 0.99
    offset: int = 0

    def __post_init__(self):
        if self.block_size <= 0:
            raise ValueError("block_size must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")

    def blocks(self, n_paths):
        """Yield (stream, count) pairs covering n_paths paths."""
        if n_paths <= 0:
            raise ValueError("n_paths must be positive")
        full, rest = divmod(n_paths, self.block_size)
        sizes = [self.block_size] * full + ([rest] if rest else [])
        return [
            (RngStream(self.master_seed, self.offset + b), size)
            for b, size in enumerate(sizes)
        ]

    def shifted(self, offset):
        """Independent plan for a sub-experiment (a second start point, a second radius...)."""
        return replace(self, offset=self.offset + offset * 1_000_003)

    def with_workers(self, workers):
        return replace(self, workers=max(1, int(workers)))
