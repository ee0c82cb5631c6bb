"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, *counters)``, so results do
not depend on the order in which cells are visited or on how work is split
across threads. The mixer is the SplitMix64 finalizer applied once per key
component.
"""

from __future__ import annotations

import zlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * np.pi


def _mix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_id(name: str) -> int:
    """Stable integer tag for a named stream."""
    return zlib.crc32(name.encode("utf-8"))


def keyed_bits(seed: int, stream: str, *counters) -> np.ndarray:
    """64 random bits per element of the broadcast counter arrays."""
    h = _mix(np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    h = _mix(h ^ np.uint64(stream_id(stream)))
    for c in counters:
        c = np.asarray(c, dtype=np.int64).astype(np.uint64)
        h = _mix(h ^ c)
    return np.asarray(h, dtype=np.uint64)


def keyed_uniform(seed: int, stream: str, *counters) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    bits = keyed_bits(seed, stream, *counters)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def keyed_normal(seed: int, stream: str, *counters) -> np.ndarray:
    """Standard normal draws (Box-Muller on two keyed uniforms)."""
    counters = np.broadcast_arrays(*[np.asarray(c, dtype=np.int64) for c in counters]) if counters else ()
    u1 = keyed_uniform(seed, stream, *counters, 0)
    u2 = keyed_uniform(seed, stream, *counters, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def keyed_permutation(seed: int, stream: str, n: int) -> np.ndarray:
    """A permutation of ``range(n)`` obtained by sorting keyed bits."""
    bits = keyed_bits(seed, stream, np.arange(n))
    return np.argsort(bits, kind="stable")
