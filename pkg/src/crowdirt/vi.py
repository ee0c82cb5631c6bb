"""Mean-field Gaussian variational inference for the Bayesian Rasch model.

Every latent gets an independent Gaussian factor parameterised by (mean,
log-std). Under the hierarchical prior the group precisions are handled on
the log scale, so their factors are log-normal in the precision itself. Only
the likelihood term of the ELBO is sampled (reparameterised draws); prior
cross-entropies and entropies are exact expectations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from ._parallel import map_rows
from .errors import DomainError, NumericError
from .irt import sigmoid
from .rng import keyed_normal
from .rpdata import ResponseMatrix, is_pruned

log = logging.getLogger(__name__)

LOG_STD_MIN = math.log(1e-6)
LOG_STD_MAX = math.log(1e3)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class PriorSpec:
    """Vague: theta ~ N(0, theta_var), b ~ N(0, b_var).

    Hierarchical: theta ~ N(m_theta, 1/u_theta), b ~ N(m_b, 1/u_b) with
    m ~ N(0, hyper_mean_var) and u ~ Gamma(gamma_shape, rate=gamma_rate).
    Variances, not standard deviations, throughout.
    """

    kind: Literal["vague", "hierarchical"] = "vague"
    theta_var: float = 1.0
    b_var: float = 1e3
    hyper_mean_var: float = 1e6
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0

    def __post_init__(self):
        if self.kind not in ("vague", "hierarchical"):
            raise DomainError(f"unknown prior kind {self.kind!r}")
        for name in ("theta_var", "b_var", "hyper_mean_var", "gamma_shape", "gamma_rate"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class ViConfig:
    mc_samples: int = 5
    max_steps: int = 5000
    step_size: float = 0.1
    elbo_window: int = 100
    rel_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1 or self.max_steps < 1 or self.elbo_window < 1:
            raise DomainError("mc_samples, max_steps and elbo_window must be positive")
        if not (self.step_size > 0 and self.rel_tol > 0):
            raise DomainError("step_size and rel_tol must be positive")


@dataclass(frozen=True, eq=False)
class VariationalState:
    """Means and log-stds of every factor.

    ``hyper_mean_*`` / ``hyper_logprec_*`` hold the (theta group, b group)
    factors for the hierarchical location and log-precision; they are unused
    under the vague prior.
    """

    theta_mean: np.ndarray
    theta_log_std: np.ndarray
    b_mean: np.ndarray
    b_log_std: np.ndarray
    hyper_mean_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    hyper_mean_log_std: np.ndarray = field(default_factory=lambda: np.full(2, math.log(0.5)))
    hyper_logprec_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    hyper_logprec_log_std: np.ndarray = field(default_factory=lambda: np.full(2, math.log(0.5)))

    @classmethod
    def initial(cls, n_subjects: int, n_items: int, log_std: float = math.log(0.5)) -> "VariationalState":
        return cls(
            np.zeros(n_subjects), np.full(n_subjects, log_std), np.zeros(n_items), np.full(n_items, log_std)
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([np.asarray(getattr(self, f), dtype=np.float64) for f in _FIELDS])

    @classmethod
    def from_flat(cls, x: np.ndarray, n_subjects: int, n_items: int) -> "VariationalState":
        sizes = (n_subjects, n_subjects, n_items, n_items, 2, 2, 2, 2)
        parts = np.split(x, np.cumsum(sizes)[:-1])
        return cls(*[p.copy() for p in parts])


_FIELDS = (
    "theta_mean", "theta_log_std", "b_mean", "b_log_std",
    "hyper_mean_mean", "hyper_mean_log_std", "hyper_logprec_mean", "hyper_logprec_log_std",
)


@dataclass(frozen=True, eq=False)
class ViFit:
    item_ids: tuple[str, ...]
    subject_ids: tuple[str, ...]
    difficulties: np.ndarray
    abilities: np.ndarray
    difficulty_std: np.ndarray
    ability_std: np.ndarray
    elbo_trace: list[float]
    converged: bool
    iterations: int
    state: VariationalState
    prior: PriorSpec


def kl_gaussian(q_mu, q_sigma, p_mu, p_sigma):
    """KL(N(q_mu, q_sigma^2) || N(p_mu, p_sigma^2)); broadcasts over arrays."""
    q_sigma = np.asarray(q_sigma, dtype=np.float64)
    p_sigma = np.asarray(p_sigma, dtype=np.float64)
    if np.any(q_sigma <= 0) or np.any(p_sigma <= 0):
        raise DomainError("standard deviations must be positive")
    ratio = (q_sigma / p_sigma) ** 2
    d = (np.asarray(q_mu, dtype=np.float64) - p_mu) / p_sigma
    kl = 0.5 * (ratio + d * d - 1.0 - np.log(ratio))
    kl = np.maximum(kl, 0.0)
    return float(kl) if kl.ndim == 0 else kl


# --- ELBO pieces ------------------------------------------------------------


def _fixed_prior_group(mu, rho, var):
    """-KL(q || N(0, var)) summed over a group, with gradients in (mu, rho)."""
    s2 = np.exp(2.0 * rho)
    value = -0.5 * np.sum(s2 / var + mu * mu / var - 1.0 - (2.0 * rho - math.log(var)))
    return value, -mu / var, 1.0 - s2 / var


def _hier_group(mu, rho, m_mu, m_rho, v_mu, v_rho):
    """E_q[log N(x | m, 1/u)] + H(q(x)) over a group, with gradients.

    Returns (value, d_mu, d_rho, d_m_mu, d_m_rho, d_v_mu, d_v_rho).
    """
    k = mu.shape[0]
    s2 = np.exp(2.0 * rho)
    sm2 = float(np.exp(2.0 * m_rho))
    sv2 = float(np.exp(2.0 * v_rho))
    e_u = float(np.exp(v_mu + 0.5 * sv2))
    diff = mu - m_mu
    sq = float(np.sum(diff * diff + s2)) + k * sm2
    value = k * (-_HALF_LOG_2PI + 0.5 * v_mu) - 0.5 * e_u * sq + float(np.sum(rho)) + k * _HALF_LOG_2PIE
    d_mu = -e_u * diff
    d_rho = 1.0 - e_u * s2
    d_m_mu = e_u * float(np.sum(diff))
    d_m_rho = -e_u * k * sm2
    d_v_mu = 0.5 * k - 0.5 * e_u * sq
    d_v_rho = -0.5 * e_u * sq * sv2
    return value, d_mu, d_rho, d_m_mu, d_m_rho, d_v_mu, d_v_rho


def _hyper_terms(m_mu, m_rho, v_mu, v_rho, prior: PriorSpec):
    """Exact prior cross-entropy and entropy of the hyperparameter factors."""
    tau2 = prior.hyper_mean_var
    a, beta = prior.gamma_shape, prior.gamma_rate
    sm2 = np.exp(2.0 * m_rho)
    sv2 = np.exp(2.0 * v_rho)
    e_u = np.exp(v_mu + 0.5 * sv2)
    value = np.sum(-0.5 * math.log(2.0 * math.pi * tau2) - (m_mu * m_mu + sm2) / (2.0 * tau2))
    # log-density of v = log u: a*log(beta) - lgamma(a) + a*v - beta*exp(v)
    value += np.sum(a * math.log(beta) - math.lgamma(a) + a * v_mu - beta * e_u)
    value += np.sum(m_rho + _HALF_LOG_2PIE) + np.sum(v_rho + _HALF_LOG_2PIE)
    return (
        float(value),
        -m_mu / tau2,
        1.0 - sm2 / tau2,
        a - beta * e_u,
        1.0 - beta * e_u * sv2,
    )


def _closed_form(state: VariationalState, prior: PriorSpec):
    """Non-sampled ELBO part and its gradient (flat, same layout as the state)."""
    J, I = state.theta_mean.shape[0], state.b_mean.shape[0]
    grad = VariationalState.from_flat(np.zeros(2 * J + 2 * I + 8), J, I)
    if prior.kind == "vague":
        v1, g_tm, g_tr = _fixed_prior_group(state.theta_mean, state.theta_log_std, prior.theta_var)
        v2, g_bm, g_br = _fixed_prior_group(state.b_mean, state.b_log_std, prior.b_var)
        grad.theta_mean[:], grad.theta_log_std[:] = g_tm, g_tr
        grad.b_mean[:], grad.b_log_std[:] = g_bm, g_br
        return v1 + v2, grad.flat()
    value, g_mm, g_mr, g_vm, g_vr = _hyper_terms(
        state.hyper_mean_mean, state.hyper_mean_log_std, state.hyper_logprec_mean, state.hyper_logprec_log_std, prior
    )
    groups = (("theta_mean", "theta_log_std"), ("b_mean", "b_log_std"))
    for g, (mf, rf) in enumerate(groups):
        out = _hier_group(
            getattr(state, mf), getattr(state, rf),
            state.hyper_mean_mean[g], state.hyper_mean_log_std[g],
            state.hyper_logprec_mean[g], state.hyper_logprec_log_std[g],
        )
        value += out[0]
        getattr(grad, mf)[:] = out[1]
        getattr(grad, rf)[:] = out[2]
        g_mm[g] += out[3]
        g_mr[g] += out[4]
        g_vm[g] += out[5]
        g_vr[g] += out[6]
    grad.hyper_mean_mean[:], grad.hyper_mean_log_std[:] = g_mm, g_mr
    grad.hyper_logprec_mean[:], grad.hyper_logprec_log_std[:] = g_vm, g_vr
    return float(value), grad.flat()


def draw_noise(seed: int, step: int, n_samples: int, n_subjects: int, n_items: int):
    """Standard-normal reparameterisation noise keyed by (seed, step, sample, latent)."""
    s = np.arange(n_samples)[:, None]
    eps_theta = keyed_normal(seed, "vi.theta", step, s, np.arange(n_subjects)[None, :])
    eps_b = keyed_normal(seed, "vi.b", step, s, np.arange(n_items)[None, :])
    return eps_theta.reshape(n_samples, n_subjects), eps_b.reshape(n_samples, n_items)


class _Workspace:
    """Scratch arrays reused across steps, one set per row chunk."""

    def __init__(self):
        self._bufs = {}

    def get(self, key, shape, dtype=np.float64):
        buf = self._bufs.get(key)
        if buf is None or buf.shape != shape:
            buf = self._bufs[key] = np.empty(shape, dtype=dtype)
        return buf


def _likelihood_term(y, obs, state: VariationalState, eps_theta, eps_b, work: _Workspace | None = None):
    """Mean over samples of log p(Y | theta, b) and its reparameterised gradient."""
    work = work or _Workspace()
    S = eps_theta.shape[0]
    sd_t = np.exp(state.theta_log_std)
    sd_b = np.exp(state.b_log_std)
    theta = state.theta_mean[None, :] + sd_t[None, :] * eps_theta  # S x J
    b = state.b_mean[None, :] + sd_b[None, :] * eps_b  # S x I
    wrong = obs - y

    def chunk(rows):
        shape = (S, rows.stop - rows.start, y.shape[1])
        x = work.get((rows.start, "x"), shape)
        e = work.get((rows.start, "e"), shape)
        t = work.get((rows.start, "t"), shape)
        l = work.get((rows.start, "l"), shape)
        neg = work.get((rows.start, "neg"), shape, bool)
        np.subtract(theta[:, rows, None], b[:, None, :], out=x)
        np.abs(x, out=e)
        np.negative(e, out=e)
        np.exp(e, out=e)  # exp(-|x|)
        np.log1p(e, out=t)
        # log sigmoid(x) = min(x, 0) - log1p(exp(-|x|)); y=0 cells also subtract x
        np.minimum(x, 0.0, out=l)
        np.subtract(l, t, out=l)
        np.multiply(l, obs[rows], out=l)
        ll = float(l.sum())
        np.multiply(x, wrong[rows], out=l)
        ll -= float(l.sum())
        np.less(x, 0.0, out=neg)
        np.add(e, 1.0, out=t)
        np.divide(1.0, t, out=t)
        np.multiply(t, e, out=t, where=neg)  # sigmoid(x)
        np.subtract(y[rows], t, out=t)
        np.multiply(t, obs[rows], out=t)  # d ll / d theta_j per cell
        return ll, t.sum(axis=2), t.sum(axis=1)

    parts = map_rows(chunk, y.shape[0])
    ll = sum(p[0] for p in parts) / S
    g_theta = np.concatenate([p[1] for p in parts], axis=1)  # S x J
    g_b = -sum(p[2] for p in parts)  # S x I
    d_tm = g_theta.mean(axis=0)
    d_tr = (g_theta * eps_theta).mean(axis=0) * sd_t
    d_bm = g_b.mean(axis=0)
    d_br = (g_b * eps_b).mean(axis=0) * sd_b
    return ll, d_tm, d_tr, d_bm, d_br


def _elbo_and_grad(y, obs, state, prior, eps_theta, eps_b, work=None):
    J, I = y.shape
    value, grad = _closed_form(state, prior)
    ll, d_tm, d_tr, d_bm, d_br = _likelihood_term(y, obs, state, eps_theta, eps_b, work)
    grad[:J] += d_tm
    grad[J:2 * J] += d_tr
    grad[2 * J:2 * J + I] += d_bm
    grad[2 * J + I:2 * J + 2 * I] += d_br
    return value + ll, grad


def _check_state(m: ResponseMatrix, state: VariationalState):
    if state.theta_mean.shape != (m.n_subjects,) or state.b_mean.shape != (m.n_items,):
        raise DomainError(
            f"variational state ({state.theta_mean.shape[0]} subjects, {state.b_mean.shape[0]} items) "
            f"does not match matrix {m.n_subjects}x{m.n_items}"
        )


def elbo_estimate(
    m: ResponseMatrix,
    state: VariationalState,
    prior: PriorSpec = PriorSpec(),
    n_samples: int = 5,
    seed: int = 0,
    step: int = 0,
) -> float:
    """Monte Carlo ELBO: sampled expected log-likelihood plus exact prior and entropy terms."""
    _check_state(m, state)
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    eps_t, eps_b = draw_noise(seed, step, n_samples, m.n_subjects, m.n_items)
    with np.errstate(over="ignore", invalid="ignore"):
        value, _ = _elbo_and_grad(m.correct, m.observed.astype(np.float64), state, prior, eps_t, eps_b)
    if not np.isfinite(value):
        raise NumericError("ELBO estimate is not finite")
    return float(value)


def elbo_gradient(m: ResponseMatrix, state: VariationalState, prior: PriorSpec, eps_theta, eps_b):
    """ELBO value and flat gradient for fixed reparameterisation noise."""
    _check_state(m, state)
    return _elbo_and_grad(m.correct, m.observed.astype(np.float64), state, prior, eps_theta, eps_b)


def _log_std_bounds(J: int, I: int) -> tuple[np.ndarray, np.ndarray]:
    n = 2 * J + 2 * I + 8
    lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    for a, b in ((J, 2 * J), (2 * J + I, 2 * J + 2 * I), (n - 6, n - 4), (n - 2, n)):
        lo[a:b], hi[a:b] = LOG_STD_MIN, LOG_STD_MAX
    return lo, hi


def fit_vi(m: ResponseMatrix, prior: PriorSpec = PriorSpec(), cfg: ViConfig = ViConfig()) -> ViFit:
    """Maximise the ELBO by stochastic gradient ascent with reparameterised draws.

    Updates are Adam-scaled per parameter with a step size decaying as
    step_size / sqrt(t). Stops once the relative change between consecutive
    non-overlapping elbo_window averages of the ELBO trace falls below
    rel_tol, or at max_steps. Point estimates are posterior means.
    """
    if not is_pruned(m):
        raise DomainError("fit_vi needs a pruned matrix (every subject and item with a response)")
    J, I = m.shape
    y = m.correct
    obs = m.observed.astype(np.float64)
    x = VariationalState.initial(J, I).flat()
    lo, hi = _log_std_bounds(J, I)
    if prior.kind == "vague":
        active = np.ones_like(x)
        active[-8:] = 0.0
    else:
        active = np.ones_like(x)

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m1 = np.zeros_like(x)
    m2 = np.zeros_like(x)
    work = _Workspace()
    trace: list[float] = []
    prev_avg = None
    converged = False
    t = 0
    while t < cfg.max_steps:
        t += 1
        state = VariationalState.from_flat(x, J, I)
        eps_t, eps_b = draw_noise(cfg.seed, t, cfg.mc_samples, J, I)
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = _elbo_and_grad(y, obs, state, prior, eps_t, eps_b, work)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise NumericError(f"ELBO diverged at step {t}; try a smaller step_size")
        trace.append(float(value))
        grad *= active
        m1 = beta1 * m1 + (1.0 - beta1) * grad
        m2 = beta2 * m2 + (1.0 - beta2) * grad * grad
        m1_hat = m1 / (1.0 - beta1**t)
        m2_hat = m2 / (1.0 - beta2**t)
        lr = cfg.step_size / math.sqrt(t)
        x = np.clip(x + lr * m1_hat / (np.sqrt(m2_hat) + eps), lo, hi)
        if t % cfg.elbo_window == 0:
            avg = float(np.mean(trace[-cfg.elbo_window:]))
            if prev_avg is not None and abs(avg - prev_avg) <= cfg.rel_tol * abs(prev_avg):
                converged = True
                break
            prev_avg = avg
    if not converged:
        log.info("VI stopped at the step cap (%d)", cfg.max_steps)
    state = VariationalState.from_flat(x, J, I)
    return ViFit(
        m.item_ids,
        m.subject_ids,
        state.b_mean.copy(),
        state.theta_mean.copy(),
        np.exp(state.b_log_std),
        np.exp(state.theta_log_std),
        trace,
        converged,
        t,
        state,
        prior,
    )
