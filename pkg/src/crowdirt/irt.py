"""Rasch (1PL) response probability, log-likelihood and its gradient."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .rpdata import ResponseMatrix


def sigmoid(x):
    """Logistic function without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_sigmoid(x):
    """log(sigmoid(x)) = -log(1 + exp(-x)), stable in both tails."""
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def _finite(name, x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    return x


def p_correct(theta, b):
    """Probability that a subject with ability ``theta`` answers an item of difficulty ``b`` correctly."""
    theta = _finite("theta", theta)
    b = _finite("b", b)
    p = sigmoid(theta - b)
    return float(p) if p.ndim == 0 else p


def _prepare(m: ResponseMatrix, thetas, bs):
    thetas = _finite("thetas", thetas).reshape(-1)
    bs = _finite("bs", bs).reshape(-1)
    if thetas.shape[0] != m.n_subjects or bs.shape[0] != m.n_items:
        raise DomainError(
            f"parameter dimensions ({thetas.shape[0]} thetas, {bs.shape[0]} bs) do not match "
            f"matrix {m.n_subjects}x{m.n_items}"
        )
    return thetas, bs


def cell_log_likelihood(y, obs, logits):
    """Per-cell log p(y | logit); zero where ``obs`` is False."""
    ll = np.where(y > 0, log_sigmoid(logits), log_sigmoid(-logits))
    return np.where(obs, ll, 0.0)


def log_likelihood(m: ResponseMatrix, thetas, bs) -> float:
    """Log-likelihood of all observed cells under the Rasch model."""
    thetas, bs = _prepare(m, thetas, bs)
    if m.cells.size == 0:
        return 0.0
    logits = thetas[:, None] - bs[None, :]
    return float(cell_log_likelihood(m.cells == 1, m.observed, logits).sum())


def grad_log_likelihood(m: ResponseMatrix, thetas, bs) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`log_likelihood` with respect to abilities and difficulties."""
    thetas, bs = _prepare(m, thetas, bs)
    resid = np.where(m.observed, m.correct - sigmoid(thetas[:, None] - bs[None, :]), 0.0)
    return resid.sum(axis=1), -resid.sum(axis=0)
