"""Comparison metrics between two parameter vectors aligned by identifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AlignedPair:
    ids: tuple[str, ...]
    xs: np.ndarray
    ys: np.ndarray
    unmatched_x: tuple[str, ...] = ()
    unmatched_y: tuple[str, ...] = ()

    @classmethod
    def join(cls, ids_x: Sequence[str], xs, ids_y: Sequence[str], ys) -> "AlignedPair":
        """Inner join on id; the order follows ``ids_x``."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if len(ids_x) != xs.shape[0] or len(ids_y) != ys.shape[0]:
            raise DomainError("each id list must match its value vector")
        pos_y = {k: n for n, k in enumerate(ids_y)}
        if len(pos_y) != len(ids_y) or len(set(ids_x)) != len(ids_x):
            raise DomainError("duplicate ids")
        shared = [k for k in ids_x if k in pos_y]
        pos_x = {k: n for n, k in enumerate(ids_x)}
        only_x = tuple(k for k in ids_x if k not in pos_y)
        only_y = tuple(k for k in ids_y if k not in pos_x)
        if only_x or only_y:
            log.info("alignment dropped %d + %d unmatched ids", len(only_x), len(only_y))
        return cls(
            tuple(shared),
            xs[[pos_x[k] for k in shared]],
            ys[[pos_y[k] for k in shared]],
            only_x,
            only_y,
        )

    def __len__(self):
        return len(self.ids)


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.shape[0])
    start = 0
    n = x.shape[0]
    while start < n:
        end = start
        while end + 1 < n and sorted_x[end + 1] == sorted_x[start]:
            end += 1
        ranks[order[start:end + 1]] = 0.5 * (start + end) + 1.0
        start = end + 1
    return ranks


def spearman(pair: AlignedPair) -> float:
    """Pearson correlation of the average ranks."""
    if len(pair) < 2:
        raise DomainError("undefined correlation: need at least 2 aligned points")
    if np.all(pair.xs == pair.xs[0]) or np.all(pair.ys == pair.ys[0]):
        raise DomainError("undefined correlation: constant vector")
    rx = average_ranks(pair.xs)
    ry = average_ranks(pair.ys)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    return min(1.0, max(-1.0, rho))


def rmsd(pair: AlignedPair) -> float:
    """Root mean squared difference, no rescaling of either vector."""
    if len(pair) < 1:
        raise DomainError("rmsd needs at least one aligned point")
    d = pair.xs - pair.ys
    return float(np.sqrt(np.mean(d * d)))


@dataclass(frozen=True)
class Disagreement:
    id: str
    rank_x: float
    rank_y: float
    abs_diff: float


def rank_disagreement(pair: AlignedPair, top_k: int | None = None) -> tuple[list[Disagreement], float]:
    """Items ordered by absolute rank difference (largest first, ties by id).

    Returns the top ``top_k`` rows and the mean absolute rank difference over
    all aligned items.
    """
    n = len(pair)
    if top_k is None:
        top_k = n
    if not 0 <= top_k <= n:
        raise DomainError(f"top_k must be between 0 and {n}, got {top_k}")
    rx = average_ranks(pair.xs)
    ry = average_ranks(pair.ys)
    diff = np.abs(rx - ry)
    rows = sorted(
        (Disagreement(i, float(a), float(b), float(d)) for i, a, b, d in zip(pair.ids, rx, ry, diff)),
        key=lambda r: (-r.abs_diff, r.id),
    )
    return rows[:top_k], float(diff.mean()) if n else 0.0


def density_summary(values, n_bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram over [min, max]; bins are right-open except the last.

    When every value is equal the result is a single bin holding all of them.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise DomainError("density_summary needs at least one value")
    if n_bins < 1:
        raise DomainError("n_bins must be at least 1")
    if not np.all(np.isfinite(v)):
        raise DomainError("values must be finite")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return np.array([lo, hi]), np.array([v.size])
    counts, edges = np.histogram(v, bins=n_bins, range=(lo, hi))
    return edges, counts
