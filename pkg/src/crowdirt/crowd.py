"""Artificial-crowd simulation from known Rasch parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError
from .irt import sigmoid
from .rng import keyed_normal, keyed_permutation, keyed_uniform
from .rpdata import MISSING, ResponseMatrix

THETA_FLOOR = -10.0


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.std) and self.std > 0) or not np.isfinite(self.mean):
            raise DomainError(f"Gaussian needs a finite mean and positive std, got {self}")


Distribution = Union[Gaussian, Sequence[float]]


@dataclass(frozen=True)
class CrowdSpec:
    n_subjects: int
    n_items: int
    theta_dist: Distribution = Gaussian()
    b_dist: Distribution = Gaussian()
    missing_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1 or self.n_items < 1:
            raise DomainError("crowd needs at least one subject and one item")
        if not 0.0 <= self.missing_rate < 1.0:
            raise DomainError(f"missing_rate must be in [0, 1), got {self.missing_rate}")
        for name, n in (("theta_dist", self.n_subjects), ("b_dist", self.n_items)):
            d = getattr(self, name)
            if not isinstance(d, Gaussian):
                vals = np.asarray(d, dtype=np.float64)
                if vals.shape != (n,) or not np.all(np.isfinite(vals)):
                    raise DomainError(f"{name} must list {n} finite values")


@dataclass(frozen=True)
class CompetenceProfile:
    """How a crowd member was trained: fraction of training data kept and share of labels corrupted."""

    train_fraction: float
    corruption_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise DomainError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if not 0.0 <= self.corruption_rate < 1.0:
            raise DomainError(f"corruption_rate must be in [0, 1), got {self.corruption_rate}")


def competence_to_theta(profile: CompetenceProfile, a: float = 1.0, c: float = 2.0) -> float:
    """Map a training profile to an ability: a*log(train_fraction) + c*log(1 - corruption_rate).

    Full clean data gives 0; the result is clamped below at -10.
    """
    theta = a * np.log(profile.train_fraction) + c * np.log1p(-profile.corruption_rate)
    return float(max(theta, THETA_FLOOR))


def sample_profiles(n: int, seed: int, fraction_range=(0.01, 1.0), corruption_range=(0.0, 0.5)) -> list[CompetenceProfile]:
    """Draw training profiles uniformly: train_fraction on (lo, hi], corruption_rate on [lo, hi)."""
    k = np.arange(n)
    u1 = keyed_uniform(seed, "profile.fraction", k)
    u2 = keyed_uniform(seed, "profile.corruption", k)
    f_lo, f_hi = fraction_range
    c_lo, c_hi = corruption_range
    return [
        CompetenceProfile(float(f_hi - (f_hi - f_lo) * a), float(c_lo + (c_hi - c_lo) * b))
        for a, b in zip(u1, u2)
    ]


def _draw(dist: Distribution, n: int, seed: int, stream: str) -> np.ndarray:
    if isinstance(dist, Gaussian):
        return dist.mean + dist.std * keyed_normal(seed, stream, np.arange(n))
    return np.asarray(dist, dtype=np.float64).copy()


def _ids(prefix: str, n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"{prefix}{k:0{width}d}" for k in range(n))


def simulate(spec: CrowdSpec) -> tuple[ResponseMatrix, np.ndarray, np.ndarray]:
    """Draw a crowd's response matrix together with its true abilities and difficulties.

    Every random quantity is keyed by (seed, stream, subject, item), so the
    output is identical however the cells are visited.
    """
    J, I = spec.n_subjects, spec.n_items
    thetas = _draw(spec.theta_dist, J, spec.seed, "crowd.theta")
    bs = _draw(spec.b_dist, I, spec.seed, "crowd.b")
    rows, cols = np.arange(J)[:, None], np.arange(I)[None, :]
    u = keyed_uniform(spec.seed, "crowd.response", rows, cols)
    cells = (u < sigmoid(thetas[:, None] - bs[None, :])).astype(np.int8)
    if spec.missing_rate > 0:
        gone = keyed_uniform(spec.seed, "crowd.missing", rows, cols) < spec.missing_rate
        cells[gone] = MISSING
    return ResponseMatrix(_ids("s", J), _ids("i", I), cells), thetas, bs


def split_half(m: ResponseMatrix, seed: int) -> tuple[ResponseMatrix, ResponseMatrix]:
    """Randomly partition subjects into two halves (the first gets the odd one out).

    Both halves keep every item and the original subject order.
    """
    J = m.n_subjects
    if J < 2:
        raise DomainError(f"split_half needs at least 2 subjects, got {J}")
    perm = keyed_permutation(seed, "split_half", J)
    h = (J + 1) // 2
    return m.take(np.sort(perm[:h])), m.take(np.sort(perm[h:]))
