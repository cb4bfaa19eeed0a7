"""General-Bayesian posterior ``p(theta) exp(-w * sum_i l(theta, x_i))``.

Sampling uses random-walk Metropolis with a Gaussian proposal. During
burn-in a scalar step scale is adapted by Robbins-Monro on its logarithm
toward a target acceptance rate, and halfway through burn-in the proposal
shape is replaced by the covariance of the burn-in draws so far. After
burn-in the kernel is frozen, so the kept draws come from a fixed
Metropolis kernel with the exact target as its stationary law.

For the quadratic loss the posterior is Gaussian and ``gb_quadratic_conjugate``
gives it in closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bootstrap import PosteriorDraws
from .calibrate import empirical_information
from .errors import InvalidArgumentError, McmcInitError, NotPositiveDefiniteError
from .losses import LossModel
from .numkit import RngStream, cholesky, spd_inverse, symmetrize

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianPrior:
    """Independent normal prior per coordinate."""

    mean: tuple
    sd: tuple

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        sd = np.atleast_1d(np.asarray(self.sd, dtype=float))
        if mean.shape != sd.shape or mean.ndim != 1:
            raise InvalidArgumentError("prior mean and sd must be vectors of equal length")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(sd)) or np.any(sd <= 0):
            raise InvalidArgumentError("prior sd must be positive and finite")
        object.__setattr__(self, "mean", tuple(mean.tolist()))
        object.__setattr__(self, "sd", tuple(sd.tolist()))

    @classmethod
    def isotropic(cls, d: int, mean: float = 0.0, sd: float = 10.0) -> "GaussianPrior":
        return cls((mean,) * d, (sd,) * d)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def logpdf(self, theta) -> float:
        m = np.asarray(self.mean)
        s = np.asarray(self.sd)
        z = (np.asarray(theta, dtype=float) - m) / s
        return float(-0.5 * z @ z - np.log(s).sum() - 0.5 * m.size * _LOG_2PI)

    def precision(self) -> np.ndarray:
        return np.diag(np.asarray(self.sd) ** -2.0)


def gb_log_posterior(prior: GaussianPrior, loss: LossModel, w: float, data, theta) -> float:
    """Unnormalized log density ``log p(theta) - w * sum_i l(theta, x_i)``."""
    if not w > 0:
        raise InvalidArgumentError(f"loss scale w must be positive, got {w}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != prior.dim:
        raise InvalidArgumentError(f"theta has length {theta.size}, prior has {prior.dim}")
    X = np.asarray(data, dtype=float)
    lp = prior.logpdf(theta)
    if X.size == 0:
        return lp
    return lp - w * float(np.sum(loss.values(theta, X)))


def make_log_posterior(prior: GaussianPrior, loss: LossModel, w: float, data) -> Callable:
    X = np.asarray(data, dtype=float)
    return lambda theta: gb_log_posterior(prior, loss, w, X, theta)


@dataclass
class McmcConfig:
    B: int
    burnin: int | None = None
    init: np.ndarray | None = None
    target_accept: float = 0.234
    adapt_window: int = 50
    seed: int = 0
    stream_id: int = 0
    # proposal shape before the pilot update; identity if omitted
    proposal_cov: np.ndarray | None = None
    pilot: bool = True

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 1:
            raise InvalidArgumentError(f"B must be a positive integer, got {self.B}")
        if self.burnin is None:
            self.burnin = int(self.B)
        if int(self.burnin) != self.burnin or self.burnin < 0:
            raise InvalidArgumentError(f"burnin must be a nonnegative integer, got {self.burnin}")
        if not 0 < self.target_accept < 1:
            raise InvalidArgumentError("target_accept must lie in (0, 1)")
        if int(self.adapt_window) != self.adapt_window or self.adapt_window < 1:
            raise InvalidArgumentError("adapt_window must be a positive integer")


@dataclass
class Chain:
    draws: np.ndarray
    acceptance_rate: float
    step_scales: list = field(default_factory=list)
    seed: int = 0
    w: float | None = None

    def to_posterior(self) -> PosteriorDraws:
        return PosteriorDraws(self.draws, "gb-mcmc", self.seed, self.w,
                              [{"acceptance_rate": self.acceptance_rate}])


def rwm_sample(logpost: Callable[[np.ndarray], float], cfg: McmcConfig) -> Chain:
    """Adaptive random-walk Metropolis.

    The step scale ``s`` starts at ``2.38 / sqrt(d)`` and, during burn-in
    only, follows ``log s += gain_t * (accept_prob_t - target_accept)`` with
    ``gain_t = (1 + t / adapt_window) ** -0.6``. When ``cfg.pilot`` is set,
    the proposal shape is re-estimated from the second quarter of burn-in
    at its midpoint.
    """
    if cfg.init is None:
        raise InvalidArgumentError("McmcConfig.init is required")
    x = np.array(cfg.init, dtype=float).reshape(-1)
    d = x.size
    lp = float(logpost(x))
    if not np.isfinite(lp):
        raise McmcInitError(f"log posterior is not finite at the initial point ({lp})")

    shape = np.eye(d) if cfg.proposal_cov is None else symmetrize(np.atleast_2d(cfg.proposal_cov))
    L = cholesky(shape)
    base_log_s = math.log(2.38 / math.sqrt(d))
    log_s = base_log_s
    burnin, B = int(cfg.burnin), int(cfg.B)
    total = burnin + B
    gen = RngStream(cfg.seed, cfg.stream_id).generator()
    out = np.empty((B, d))
    burn = np.empty((burnin, d))
    pilot_at = burnin // 2 if cfg.pilot and burnin >= 40 * (d + 1) else -1
    scales = [math.exp(log_s)]
    kept_accepts = 0

    for t in range(total):
        z = gen.standard_normal(d)
        u = gen.random()
        prop = x + math.exp(log_s) * (L @ z)
        lp_prop = float(logpost(prop))
        log_a = lp_prop - lp if np.isfinite(lp_prop) else -np.inf
        accept = math.log(u) < log_a if u > 0 else True
        if accept:
            x, lp = prop, lp_prop
        if t < burnin:
            burn[t] = x
            a = math.exp(min(0.0, log_a))
            log_s += (1.0 + t / cfg.adapt_window) ** -0.6 * (a - cfg.target_accept)
            if (t + 1) % cfg.adapt_window == 0:
                scales.append(math.exp(log_s))
            if t + 1 == pilot_at:
                L, log_s = _pilot_update(burn[pilot_at // 2:pilot_at], L, log_s, base_log_s)
        else:
            out[t - burnin] = x
            kept_accepts += accept
    return Chain(out, kept_accepts / B, scales, cfg.seed)


def _pilot_update(segment, L, log_s, base_log_s):
    if segment.shape[0] < 2:
        return L, log_s
    cov = np.atleast_2d(np.cov(segment, rowvar=False))
    try:
        L_new = cholesky(cov, pivot_rtol=1e-10)
    except NotPositiveDefiniteError:
        log.info("pilot covariance degenerate; keeping the initial proposal shape")
        return L, log_s
    return L_new, base_log_s


def gb_quadratic_conjugate(prior: GaussianPrior, sigma1, w: float, data) -> tuple[np.ndarray, np.ndarray]:
    """Exact general-Bayes posterior ``(mean, cov)`` for the quadratic loss.

    Precision ``diag(sd^-2) + n w S1^-1``; mean
    ``P^-1 (diag(sd^-2) m + w S1^-1 sum_i x_i)``.
    """
    if not w > 0:
        raise InvalidArgumentError(f"loss scale w must be positive, got {w}")
    s1inv = spd_inverse(np.atleast_2d(np.asarray(sigma1, dtype=float)))
    d = s1inv.shape[0]
    if prior.dim != d:
        raise InvalidArgumentError(f"prior dimension {prior.dim} does not match loss dimension {d}")
    X = np.asarray(data, dtype=float).reshape(-1, d)
    n = X.shape[0]
    P0 = prior.precision()
    P = P0 + n * w * s1inv
    cov = spd_inverse(P)
    rhs = P0 @ np.asarray(prior.mean) + w * s1inv @ X.sum(axis=0)
    return cov @ rhs, cov


def asymptotic_proposal(prior: GaussianPrior, loss: LossModel, w: float, data, theta_hat):
    """Covariance ``(w n J_n + prior precision)^-1`` used as the initial proposal shape."""
    X = np.asarray(data, dtype=float)
    _, J_n = empirical_information(loss, X, theta_hat)
    P = w * X.shape[0] * J_n + prior.precision()
    try:
        return spd_inverse(P, pivot_rtol=1e-12)
    except NotPositiveDefiniteError:
        return np.diag(np.asarray(prior.sd) ** 2)


def gb_sample(prior: GaussianPrior, loss: LossModel, w: float, data, B: int, seed: int,
              burnin: int | None = None, init=None, stream_id: int = 0,
              target_accept: float = 0.234, adapt_window: int = 50) -> Chain:
    """Run ``rwm_sample`` on the general-Bayes posterior.

    ``init`` should normally be the empirical risk minimizer; the initial
    proposal shape is the asymptotic posterior covariance there.
    """
    X = np.asarray(data, dtype=float)
    if init is None:
        init = loss.default_init(X)
    init = np.asarray(init, dtype=float)
    cfg = McmcConfig(B=B, burnin=burnin, init=init, target_accept=target_accept,
                     adapt_window=adapt_window, seed=seed, stream_id=stream_id,
                     proposal_cov=asymptotic_proposal(prior, loss, w, X, init))
    chain = rwm_sample(make_log_posterior(prior, loss, w, X), cfg)
    chain.w = float(w)
    return chain


def mcse(draws) -> np.ndarray:
    """Batch-means Monte Carlo standard error of the mean, per coordinate."""
    x = np.atleast_2d(np.asarray(draws, dtype=float))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    n = x.shape[0]
    nb = max(2, int(math.sqrt(n)))
    size = n // nb
    if size < 1:
        return x.std(axis=0, ddof=1) / math.sqrt(n)
    means = x[: nb * size].reshape(nb, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) * math.sqrt(size / n)
