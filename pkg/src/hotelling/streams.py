"""Counter-based random streams for reproducible Monte Carlo estimates.

Samples are cut into fixed-size blocks and block ``k`` always draws from the
Philox stream keyed by ``(seed, k)``.  Blocks can therefore run in any order
or in parallel and still reproduce the sequential estimate bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

BLOCK = 1 << 16


def block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(samples: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(int(samples), block)
    return [block] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class Moments:
    """Sums of per-sample deviations ``d`` from a reference payoff vector."""

    total: np.ndarray
    total_sq: np.ndarray

    def __add__(self, other: "Moments") -> "Moments":
        return Moments(self.total + other.total, self.total_sq + other.total_sq)

    @classmethod
    def dense(cls, d) -> "Moments":
        d = np.asarray(d, dtype=float)
        return cls(d.sum(axis=0), (d * d).sum(axis=0))

    @classmethod
    def sparse(cls, index, value, n: int) -> "Moments":
        """Moments of deviations given as ``(server index, value)`` entries; the rest are zero."""
        value = np.asarray(value, dtype=float)
        return cls(np.bincount(index, value, minlength=n), np.bincount(index, value * value, minlength=n))


def estimate(reference, samples: int, seed: int,
             block_fn: Callable[[np.random.Generator, int], "np.ndarray | Moments"],
             jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of ``reference + d`` over all samples.

    ``block_fn(rng, size)`` returns the deviations ``d[size, n]`` of one block,
    or their ``Moments`` directly when most deviations are zero.  Working with
    deviations keeps the estimate exactly equal to ``reference`` when every
    deviation is zero.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    reference = np.asarray(reference, dtype=float)
    sizes = block_sizes(samples)

    def run(k: int) -> Moments:
        out = block_fn(block_rng(seed, k), sizes[k])
        return out if isinstance(out, Moments) else Moments.dense(out)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    acc = parts[0]
    for part in parts[1:]:
        acc = acc + part

    mean_d = acc.total / samples
    if samples > 1:
        var = np.maximum(acc.total_sq / samples - mean_d ** 2, 0.0) * samples / (samples - 1)
        se = np.sqrt(var / samples)
    else:
        se = np.zeros_like(mean_d)
    return reference + mean_d, se
