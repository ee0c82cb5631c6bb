"""Marginal maximum likelihood (Bock-Aitkin EM) for item difficulties and MAP ability scoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_rows
from .errors import DomainError, NumericError
from .irt import log_sigmoid, sigmoid
from .quadrature import DEFAULT_POINTS, gauss_hermite
from .rpdata import ResponseMatrix, is_pruned

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MmlConfig:
    quadrature_points: int = DEFAULT_POINTS
    prior_theta_sigma: float = 1.0
    max_iterations: int = 500
    convergence_tol: float = 1e-5
    difficulty_prior_sigma: float = 10.0

    def __post_init__(self):
        if self.quadrature_points < 1 or self.max_iterations < 1:
            raise DomainError("quadrature_points and max_iterations must be positive")
        for name in ("prior_theta_sigma", "convergence_tol", "difficulty_prior_sigma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True, eq=False)
class MmlFit:
    item_ids: tuple[str, ...]
    subject_ids: tuple[str, ...]
    difficulties: np.ndarray
    abilities: np.ndarray
    marginal_loglik_trace: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def _estep(y, obs, nodes, log_w, b):
    """Posterior node weights per subject plus the summed log marginal likelihood."""
    logits = nodes[:, None] - b[None, :]
    lp, lq = log_sigmoid(logits), log_sigmoid(-logits)
    wrong = obs - y

    def chunk(rows):
        ll = y[rows] @ lp.T + wrong[rows] @ lq.T + log_w[None, :]
        top = ll.max(axis=1, keepdims=True)
        post = np.exp(ll - top)
        norm = post.sum(axis=1, keepdims=True)
        post /= norm
        marg = top[:, 0] + np.log(norm[:, 0])
        return post.T @ y[rows], post.T @ obs[rows], marg.sum()

    parts = map_rows(chunk, y.shape[0])
    r = sum(p[0] for p in parts)
    n = sum(p[1] for p in parts)
    marg = sum(p[2] for p in parts)
    return r, n, marg


def _item_objective(b, nodes, r, n, ridge):
    logits = nodes[:, None] - b[None, :]
    return (r * log_sigmoid(logits) + (n - r) * log_sigmoid(-logits)).sum(axis=0) - 0.5 * ridge * b * b


def _mstep(b, nodes, r, n, ridge, max_newton=50, tol=1e-10):
    """Maximize each item's expected complete-data objective by damped Newton."""
    b = b.copy()
    f = _item_objective(b, nodes, r, n, ridge)
    for _ in range(max_newton):
        p = sigmoid(nodes[:, None] - b[None, :])
        grad = (n * p - r).sum(axis=0) - ridge * b
        curv = (n * p * (1.0 - p)).sum(axis=0) + ridge
        step = grad / curv
        f_new = _item_objective(b + step, nodes, r, n, ridge)
        for _ in range(40):
            worse = f_new < f
            if not worse.any():
                break
            step = np.where(worse, 0.5 * step, step)
            f_new = np.where(worse, _item_objective(b + step, nodes, r, n, ridge), f_new)
        worse = f_new < f
        step = np.where(worse, 0.0, step)
        b = b + step
        f = np.where(worse, f, f_new)
        if np.max(np.abs(step)) < tol:
            break
    return b


def _initial_difficulties(y, obs):
    right = y.sum(axis=0)
    total = obs.sum(axis=0)
    return np.log((total - right + 0.5) / (right + 0.5))


def marginal_objective(m: ResponseMatrix, bs, cfg: MmlConfig = MmlConfig()) -> float:
    """Quadrature-approximated log marginal likelihood plus the difficulty ridge term."""
    rule = gauss_hermite(cfg.quadrature_points, 0.0, cfg.prior_theta_sigma)
    obs = m.observed.astype(np.float64)
    bs = np.asarray(bs, dtype=np.float64)
    _, _, marg = _estep(m.correct, obs, rule.nodes, np.log(rule.weights), bs)
    return float(marg - 0.5 * np.sum(bs * bs) / cfg.difficulty_prior_sigma**2)


def fit_mml(m: ResponseMatrix, cfg: MmlConfig = MmlConfig()) -> MmlFit:
    """Fit difficulties by Bock-Aitkin EM on a fixed quadrature grid, then MAP-score abilities.

    Abilities are integrated out as N(0, prior_theta_sigma^2) random effects.
    The trace records the penalized marginal log-likelihood (marginal
    log-likelihood minus the difficulty ridge) after 0, 1, 2, ... M-steps;
    that is the quantity EM increases monotonically.
    """
    if not is_pruned(m):
        raise DomainError("fit_mml needs a pruned matrix (every subject and item with a response)")
    rule = gauss_hermite(cfg.quadrature_points, 0.0, cfg.prior_theta_sigma)
    nodes, log_w = rule.nodes, np.log(rule.weights)
    ridge = 1.0 / cfg.difficulty_prior_sigma**2
    y = m.correct
    obs = m.observed.astype(np.float64)

    b = _initial_difficulties(y, obs)
    trace: list[float] = []
    converged = False
    it = 0
    r, n, marg = _estep(y, obs, nodes, log_w, b)
    trace.append(float(marg - 0.5 * ridge * b @ b))
    while it < cfg.max_iterations:
        it += 1
        b_new = _mstep(b, nodes, r, n, ridge)
        if not np.all(np.isfinite(b_new)):
            raise NumericError(f"non-finite difficulty update at EM iteration {it}")
        delta = float(np.max(np.abs(b_new - b)))
        b = b_new
        r, n, marg = _estep(y, obs, nodes, log_w, b)
        value = float(marg - 0.5 * ridge * b @ b)
        if not np.isfinite(value):
            raise NumericError(f"non-finite marginal log-likelihood at EM iteration {it}")
        trace.append(value)
        if delta < cfg.convergence_tol:
            converged = True
            break
    if not converged:
        log.warning("EM stopped at the iteration cap (%d) without converging", cfg.max_iterations)
    thetas = score_map(m, b, cfg.prior_theta_sigma)
    return MmlFit(m.item_ids, m.subject_ids, b, thetas, trace, converged, it)


def _map_objective(theta, y, obs, b, prec):
    logits = theta[:, None] - b[None, :]
    ll = np.where(y > 0, log_sigmoid(logits), log_sigmoid(-logits))
    return (obs * ll).sum(axis=1) - 0.5 * prec * theta * theta


def score_map(m: ResponseMatrix, bs, prior_sigma: float = 1.0, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Posterior-mode ability of each subject given fixed difficulties and a N(0, prior_sigma^2) prior."""
    bs = np.asarray(bs, dtype=np.float64).reshape(-1)
    if bs.shape[0] != m.n_items:
        raise DomainError(f"got {bs.shape[0]} difficulties for {m.n_items} items")
    if not np.all(np.isfinite(bs)):
        raise DomainError("difficulties must be finite")
    if not (np.isfinite(prior_sigma) and prior_sigma > 0):
        raise DomainError("prior_sigma must be positive")
    prec = 1.0 / prior_sigma**2
    y_all = m.correct
    obs_all = m.observed.astype(np.float64)

    def chunk(rows):
        y, obs = y_all[rows], obs_all[rows]
        theta = np.zeros(y.shape[0])
        f = _map_objective(theta, y, obs, bs, prec)
        for _ in range(max_iter):
            p = sigmoid(theta[:, None] - bs[None, :])
            grad = (obs * (y - p)).sum(axis=1) - prec * theta
            curv = (obs * p * (1.0 - p)).sum(axis=1) + prec
            step = grad / curv
            f_new = _map_objective(theta + step, y, obs, bs, prec)
            for _ in range(40):
                worse = f_new < f
                if not worse.any():
                    break
                step = np.where(worse, 0.5 * step, step)
                f_new = np.where(worse, _map_objective(theta + step, y, obs, bs, prec), f_new)
            step = np.where(f_new < f, 0.0, step)
            theta = theta + step
            f = np.maximum(f, f_new)
            if np.max(np.abs(step), initial=0.0) < tol:
                break
        return theta

    return np.concatenate(map_rows(chunk, m.n_subjects))
