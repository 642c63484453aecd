"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The numba kernels are used when numba imports and ``BADBAND_DISABLE_NUMBA``
is unset (or "0"). Set it to "1" to force the numpy path. Both paths obey
the same determinism rule: reductions run in an order fixed by the input
shape alone, never by the thread count. fastmath stays off everywhere,
since it would license reassociation of the compensated sums.

Data layout is band-major: ``x[j, k]`` is band ``j`` of pixel ``k``.
"""

from __future__ import annotations

import os

import numpy as np

# fixed pixel-block partition for the covariance reduction
COV_MAX_BLOCKS = 64
COV_MIN_BLOCK = 1024
APPLY_TILE = 4096


def _env_disabled() -> bool:
    return os.environ.get("BADBAND_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _env_disabled():
        raise ImportError("numba disabled by BADBAND_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skips the TBB probe, which warns on old TBB builds
        numba.config.THREADING_LAYER = "workqueue"
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def block_bounds(n: int) -> np.ndarray:
    """Pixel-block edges used by the covariance reduction (depends on n only)."""
    nblocks = max(1, min(COV_MAX_BLOCKS, -(-n // COV_MIN_BLOCK)))
    step = -(-n // nblocks)
    edges = np.arange(0, n + step, step, dtype=np.int64)
    edges[-1] = n
    return np.unique(np.minimum(edges, n))


# --------------------------------------------------------------------------
# numpy flavour

def band_stats_numpy(x):
    n = x.shape[1]
    means = x.sum(axis=1) / n
    c = x - means[:, None]
    # numpy reduces contiguous rows pairwise, which is deterministic
    return means, np.sqrt((c * c).sum(axis=1))


def covariance_sum_numpy(x, edges):
    L = x.shape[0]
    total = np.zeros((L, L))
    for lo, hi in zip(edges[:-1], edges[1:]):
        xb = x[:, lo:hi]
        total += xb @ xb.T
    return np.tril(total) + np.tril(total, -1).T


def apply_pixels_numpy(w, x):
    return w @ x


def partial_shuffle_numpy(n, draws):
    perm = np.arange(n, dtype=np.int64)
    for i in range(draws.shape[0]):
        j = i + int(draws[i]) % (n - i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm[: draws.shape[0]].copy()


# --------------------------------------------------------------------------
# numba flavour

if HAVE_NUMBA:

    @njit(cache=True)
    def _neumaier(v):
        s = 0.0
        comp = 0.0
        for a in v:
            t = s + a
            if abs(s) >= abs(a):
                comp += (s - t) + a
            else:
                comp += (a - t) + s
            s = t
        return s + comp

    @njit(parallel=True, cache=True)
    def band_stats_numba(x):
        L, n = x.shape
        means = np.empty(L)
        norms = np.empty(L)
        for j in prange(L):
            mu = _neumaier(x[j]) / n
            sq = np.empty(n)
            for k in range(n):
                d = x[j, k] - mu
                sq[k] = d * d
            means[j] = mu
            norms[j] = np.sqrt(_neumaier(sq))
        return means, norms

    @njit(parallel=True, cache=True)
    def _cov_blocks(x, edges):
        # one BLAS product per fixed block; the block split is thread independent
        L = x.shape[0]
        nb = edges.shape[0] - 1
        parts = np.zeros((nb, L, L))
        for b in prange(nb):
            xb = np.ascontiguousarray(x[:, edges[b]:edges[b + 1]])
            parts[b] = np.dot(xb, xb.T)
        return parts

    @njit(cache=True)
    def _cov_combine(parts):
        nb, L, _ = parts.shape
        out = np.zeros((L, L))
        for b in range(nb):
            for i in range(L):
                for j in range(i + 1):
                    out[i, j] += parts[b, i, j]
        for i in range(L):
            for j in range(i):
                out[j, i] = out[i, j]
        return out

    def covariance_sum_numba(x, edges):
        return _cov_combine(_cov_blocks(x, edges))

    @njit(parallel=True, cache=True)
    def apply_pixels_numba(w, x):
        L, n = x.shape
        y = np.zeros(n)
        ntiles = (n + APPLY_TILE - 1) // APPLY_TILE
        for t in prange(ntiles):
            lo = t * APPLY_TILE
            hi = min(n, lo + APPLY_TILE)
            # band-outer keeps the inner loop contiguous; per-pixel order is still j = 0..L-1
            for j in range(L):
                wj = w[j]
                for k in range(lo, hi):
                    y[k] += wj * x[j, k]
        return y

    @njit(cache=True)
    def partial_shuffle_numba(n, draws):
        perm = np.arange(n)
        for i in range(draws.shape[0]):
            j = i + np.int64(draws[i] % np.uint64(n - i))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        return perm[: draws.shape[0]].copy()

else:
    band_stats_numba = covariance_sum_numba = apply_pixels_numba = partial_shuffle_numba = None


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def band_stats(x):
    """Per-band means and Euclidean norms of the mean-removed bands."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return band_stats_numba(x)
    return band_stats_numpy(x)


def covariance_sum(x):
    """Full symmetric ``x @ x.T`` reduced over fixed pixel blocks."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    edges = block_bounds(x.shape[1])
    if HAVE_NUMBA:
        return covariance_sum_numba(x, edges)
    return covariance_sum_numpy(x, edges)


def apply_pixels(w, x):
    """Per-pixel dot products ``w . x[:, k]``."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return apply_pixels_numba(w, x)
    return apply_pixels_numpy(w, x)


def partial_shuffle(n, draws):
    draws = np.ascontiguousarray(draws, dtype=np.uint64)
    if HAVE_NUMBA:
        return partial_shuffle_numba(n, draws)
    return partial_shuffle_numpy(n, draws)


def set_threads(n: int | None) -> int:
    """Cap numba's worker threads; returns the count in effect (1 for numpy)."""
    if not HAVE_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    if n is None or n <= 0:
        n = limit
    numba.set_num_threads(min(int(n), limit))
    return numba.get_num_threads()
