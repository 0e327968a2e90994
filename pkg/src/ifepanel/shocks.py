"""Pre-drawn uniform shocks and reproducible replication streams.

All simulation randomness is drawn up front (common random numbers):
the shock store is a pure function of ``(seed, n_paths, n, T)``, so every
downstream quantity that consumes it is a deterministic function of the
parameters.  Replication streams for the Monte Carlo harness are derived
by key splitting, which makes results independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Purpose tags for derived streams; distinct tags give disjoint streams
# for the same (seed, replication) pair.
TAG_PANEL = 1
TAG_SHOCKS = 2
TAG_NOISE = 3


@dataclass(frozen=True)
class ShockStore:
    """Uniform(0,1) shocks indexed ``v[h, i, t]``, drawn once and frozen."""

    seed: int
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, float)
        if v.ndim != 3:
            raise ValueError(f"shock array must be (n_paths, n, T), got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    @property
    def n_paths(self) -> int:
        return self.v.shape[0]

    @property
    def n(self) -> int:
        return self.v.shape[1]

    @property
    def T(self) -> int:
        return self.v.shape[2]

    def subset_individuals(self, rows) -> "ShockStore":
        """Shocks for a subset of individuals, keyed to the same seed."""
        return ShockStore(self.seed, self.v[:, np.asarray(rows), :])


def draw_shocks(seed: int, n_paths: int, n: int, T: int) -> ShockStore:
    """Draw the full shock array from a counter-based generator.

    Two calls with equal ``(seed, n_paths, n, T)`` return bit-identical
    arrays.  Values are placed at lattice midpoints ``(k + 0.5) / 2^53``,
    so they lie strictly inside (0, 1).
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if n < 1 or T < 1:
        raise ValueError(f"need n >= 1 and T >= 1, got n={n}, T={T}")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return ShockStore(int(seed), open_uniform(rng, (n_paths, n, T)))


def open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniforms strictly inside (0, 1), at lattice midpoints (k + 0.5)/2^53."""
    ints = rng.integers(0, 1 << 53, size=shape, dtype=np.int64)
    return (ints.astype(np.float64) + 0.5) * 2.0**-53


def replication_rng(seed: int, replication: int, tag: int) -> np.random.Generator:
    """Independent generator for one (replication, purpose) pair."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(replication)))
    return np.random.default_rng(ss)


def replication_seed(seed: int, replication: int, tag: int) -> int:
    """Derived 64-bit seed for one (replication, purpose) pair."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(replication)))
    return int(ss.generate_state(1, np.uint64)[0])
