"""Training-set filters over item difficulty or percent correct."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .rpdata import ResponseMatrix

DIFFICULTY_KINDS = ("AVI", "AVO", "UB", "LB")
PC_KINDS = ("PCUB", "PCLB")
KINDS = DIFFICULTY_KINDS + PC_KINDS

# strategies whose retained set grows with the threshold
_GROWS = {"AVI": True, "UB": True, "PCUB": True, "AVO": False, "LB": False, "PCLB": False}


@dataclass(frozen=True)
class FilterStrategy:
    kind: str
    threshold: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown filter strategy {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.threshold):
            raise DomainError("threshold must be finite")
        if self.kind in PC_KINDS and not 0.0 <= self.threshold <= 1.0:
            raise DomainError(f"{self.kind} threshold must lie in [0, 1], got {self.threshold}")

    @property
    def uses_percent_correct(self) -> bool:
        return self.kind in PC_KINDS


@dataclass(frozen=True, eq=False)
class FilterReport:
    strategy: FilterStrategy
    item_ids: tuple[str, ...]
    values: np.ndarray
    retained: np.ndarray

    @property
    def retained_item_ids(self) -> list[str]:
        return [i for i, keep in zip(self.item_ids, self.retained) if keep]

    @property
    def retained_fraction(self) -> float:
        return float(self.retained.sum()) / len(self.item_ids) if self.item_ids else 0.0

    def rows(self):
        return [(i, float(v), bool(k)) for i, v, k in zip(self.item_ids, self.values, self.retained)]


def retain_mask(values: np.ndarray, kind: str, d: float) -> np.ndarray:
    """Strict-inequality retention predicate of each strategy."""
    if kind == "AVI":
        return np.abs(values) < d
    if kind == "AVO":
        return np.abs(values) > d
    if kind in ("UB", "PCUB"):
        return values < d
    if kind in ("LB", "PCLB"):
        return values > d
    raise DomainError(f"unknown filter strategy {kind!r}")


def _values(values, kind: str) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise DomainError("filter values must be finite")
    if kind in PC_KINDS and (np.any(v < 0) or np.any(v > 1)):
        raise DomainError(f"{kind} expects percent-correct values in [0, 1]")
    return v


def apply_filter(
    item_ids: Sequence[str],
    values,
    strategy: FilterStrategy,
    value_kind: str | None = None,
) -> FilterReport:
    """Keep the items whose value satisfies the strategy's strict inequality.

    ``value_kind`` ("difficulty" or "percent_correct") guards against feeding
    difficulties to a percent-correct strategy or the other way round.
    """
    if value_kind is not None:
        expected = "percent_correct" if strategy.uses_percent_correct else "difficulty"
        if value_kind != expected:
            raise DomainError(f"{strategy.kind} filters {expected} values, got {value_kind}")
    v = _values(values, strategy.kind)
    ids = tuple(item_ids)
    if len(ids) != v.shape[0]:
        raise DomainError(f"{len(ids)} item ids for {v.shape[0]} values")
    return FilterReport(strategy, ids, v, retain_mask(v, strategy.kind, strategy.threshold))


def percent_correct(m: ResponseMatrix) -> np.ndarray:
    """Share of observed responses that are correct, per item."""
    n = m.observed.sum(axis=0)
    if np.any(n == 0):
        empty = [m.item_ids[k] for k in np.flatnonzero(n == 0)]
        raise DomainError(f"items without responses: {empty[:5]}")
    return (m.cells == 1).sum(axis=0) / n


def _candidates(v: np.ndarray, kind: str) -> list[float]:
    """Thresholds ordered so that the retained count is non-decreasing."""
    keys = np.abs(v) if kind in ("AVI", "AVO") else v
    uniq = np.unique(keys)
    if _GROWS[kind]:
        cands = list(uniq) + [np.nextafter(uniq[-1], np.inf)]
    else:
        cands = [np.nextafter(uniq[0], -np.inf)] + list(uniq)
        cands.reverse()
    if kind in PC_KINDS:
        cands = [c for c in cands if 0.0 <= c <= 1.0]
    return [float(c) for c in cands]


def sweep_to_fraction(item_ids: Sequence[str], values, kind: str, target_fraction: float) -> FilterStrategy:
    """Threshold whose retained fraction is the largest one not above ``target_fraction``."""
    if kind not in KINDS:
        raise DomainError(f"unknown filter strategy {kind!r}")
    if not 0.0 < target_fraction <= 1.0:
        raise DomainError(f"target_fraction must be in (0, 1], got {target_fraction}")
    v = _values(values, kind)
    if v.size == 0:
        raise DomainError("no items to filter")
    cands = _candidates(v, kind)
    counts = [int(retain_mask(v, kind, d).sum()) for d in cands] if v.size <= 64 else None
    budget = target_fraction * v.size
    if counts is None:
        keys = np.sort(np.abs(v) if kind in ("AVI", "AVO") else v)

        def count(d):
            if _GROWS[kind]:
                return int(np.searchsorted(keys, d, side="left"))
            return int(keys.size - np.searchsorted(keys, d, side="right"))

        counts = _LazyCounts(cands, count)
    k = bisect.bisect_right(counts, budget + 1e-9 * v.size) - 1
    if k < 0 or counts[k] == 0:
        raise DomainError(f"no {kind} threshold retains any item within a {target_fraction:.4g} budget")
    return FilterStrategy(kind, cands[k])


class _LazyCounts:
    """Sequence view of retained counts per candidate, evaluated on demand by bisect."""

    def __init__(self, cands, count):
        self._cands = cands
        self._count = count

    def __len__(self):
        return len(self._cands)

    def __getitem__(self, k):
        return self._count(self._cands[k])
