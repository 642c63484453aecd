"""Portable seeded randomness.

Every random quantity in the package is drawn from SplitMix64 used in
counter mode: output ``i`` of stream ``seed`` is

    mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)          (mod 2**64)

with ``mix64`` the standard SplitMix64 finalizer. Uniforms take the top 53
bits, offset by half an ulp so they lie strictly inside (0, 1):
``((x >> 11) + 0.5) * 2**-53``. Normal variates are the inverse normal CDF
of those uniforms. Sub-streams are keyed with :func:`derive_seed`.

Because nothing here touches a platform RNG, another implementation that
follows the three formulas above reproduces every cube and every target
sample bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from . import _kernels

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Fold integer keys into a seed: h <- mix64((h ^ key) + GOLDEN) per key."""
    h = int(seed) & MASK64
    for k in keys:
        h = mix64((h ^ (int(k) & MASK64)) + GOLDEN)
    return h


def raw_stream(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Outputs ``offset .. offset+n-1`` of the stream as uint64."""
    counters = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    z = np.uint64(int(seed) & MASK64) + counters * np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


def uniform(seed: int, n: int, offset: int = 0) -> np.ndarray:
    x = raw_stream(seed, n, offset) >> np.uint64(11)
    return (x.astype(np.float64) + 0.5) * 2.0**-53


def normal(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Standard normal variates by inverse CDF of :func:`uniform`."""
    return ndtri(uniform(seed, n, offset))


def permutation_prefix(n: int, k: int, seed: int) -> np.ndarray:
    """First ``k`` entries of a seeded Fisher-Yates shuffle of ``range(n)``.

    Step ``i`` swaps position ``i`` with ``i + raw_stream[i] % (n - i)``.
    The modulo bias is below ``n / 2**64`` and ignored. Prefixes are
    stable: the first ``k`` entries do not depend on how many more are
    drawn later, which is what lets callers extend a sample.
    """
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} distinct items from {n}")
    draws = raw_stream(seed, k)
    return _kernels.partial_shuffle(int(n), draws)
