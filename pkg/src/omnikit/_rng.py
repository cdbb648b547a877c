"""Counter-based randomness with stable per-graph / per-edge substreams.

Every random quantity is a pure SplitMix64 hash of (seed, stream labels,
counter), so draws for one edge or vertex never depend on how many other
edges, vertices or graphs are sampled.  Growing ``n`` or ``m`` leaves all
earlier draws untouched, and parallel sampling of distinct graphs produces
bit-identical output to sequential sampling.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(2**53)


def _mix(x):
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(30))) * _MIX1).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(27))) * _MIX2).astype(np.uint64)
        return x ^ (x >> np.uint64(31))


def stream_key(seed, *labels):
    """Derive a 64-bit substream key from a seed and a path of labels.

    Labels may be ints or short strings; the same path always yields the
    same key.
    """
    key = _mix(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for label in labels:
        if isinstance(label, str):
            folded = np.uint64(0)
            for ch in label.encode("utf8"):
                folded = _mix(folded ^ np.uint64(ch))
            token = folded
        else:
            token = np.uint64(int(label) & 0xFFFFFFFFFFFFFFFF)
        key = _mix(key ^ token)
    return np.uint64(key)


def _to_unit(hashed):
    """Map uint64 hashes to uniform floats in [0, 1) with 53-bit precision."""
    return (hashed >> np.uint64(11)).astype(np.float64) / _U53


def counter_uniforms(key, counters):
    """Uniform draws indexed by explicit counters under one stream key."""
    counters = np.asarray(counters, dtype=np.uint64)
    return _to_unit(_mix(counters ^ np.uint64(key)))


def edge_counters(i_idx, j_idx):
    """Pack vertex index pairs (i < j, both < 2^32) into edge counters."""
    i_idx = np.asarray(i_idx, dtype=np.uint64)
    j_idx = np.asarray(j_idx, dtype=np.uint64)
    return (i_idx << np.uint64(32)) | j_idx


def edge_uniforms(key, n):
    """One uniform per unordered vertex pair of an n-vertex graph.

    Returns (i_idx, j_idx, u) for the strict upper triangle in row-major
    order.  The draw for pair (i, j) depends only on (key, i, j).
    """
    i_idx, j_idx = np.triu_indices(n, k=1)
    u = counter_uniforms(key, edge_counters(i_idx, j_idx))
    return i_idx, j_idx, u


def vertex_uniforms(key, n, width):
    """A (n, width) block of uniforms, one row per vertex."""
    counters = (np.arange(n, dtype=np.uint64)[:, None] << np.uint64(8)) | np.arange(
        width, dtype=np.uint64
    )[None, :]
    return counter_uniforms(key, counters)
