"""Dirichlet-weighted bootstrap samplers.

``llb_sample`` draws from the loss-likelihood bootstrap: replicate ``j``
draws simplex weights from stream ``(seed, j)`` and minimizes the weighted
risk. ``wlb_sample`` is the same procedure with a negative log-likelihood
loss, and ``bb_functional`` applies an arbitrary functional to each
Dirichlet-weighted empirical distribution.

Weights are kept on the simplex throughout. Multiplying them by ``n`` does
not move any weighted minimizer.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, LossbootError, NumericError, ReplicateError
from .losses import LossModel
from .numkit import RngStream, dirichlet_uniform
from .optimize import OptimOptions, fit_erm, minimize_weighted_risk

log = logging.getLogger(__name__)

METHODS = ("llb", "wlb", "bb", "gb-mcmc")


@dataclass
class PosteriorDraws:
    """``B x d`` parameter draws with provenance."""

    draws: np.ndarray
    method: str
    seed: int
    w: float | None = None
    diagnostics: list = field(default_factory=list)
    failed: list = field(default_factory=list)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown method {self.method!r}")
        if self.draws.shape[0] < 1:
            raise InvalidArgumentError("posterior sample is empty")
        if not np.all(np.isfinite(self.draws)):
            raise InvalidArgumentError("posterior draws must be finite")

    @property
    def B(self) -> int:
        return self.draws.shape[0]

    @property
    def d(self) -> int:
        return self.draws.shape[1]

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def cov(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.draws, rowvar=False))

    def metadata(self) -> dict:
        return {"method": self.method, "seed": int(self.seed), "w": self.w,
                "B": self.B, "d": self.d, "failed_replicates": list(self.failed)}


def _validate(data, B, threads):
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError("data must be a non-empty (n, k) array")
    if int(B) != B or B < 1:
        raise InvalidArgumentError(f"B must be a positive integer, got {B}")
    if int(threads) != threads or threads < 1:
        raise InvalidArgumentError(f"threads must be a positive integer, got {threads}")
    return X


def _run_replicates(task: Callable[[int], tuple], B: int, threads: int, on_error: str):
    if on_error not in ("raise", "skip"):
        raise InvalidArgumentError(f"on_error must be 'raise' or 'skip', got {on_error!r}")

    def guarded(j):
        try:
            return task(j)
        except LossbootError as exc:
            if on_error == "raise":
                raise ReplicateError(j, exc) from exc
            return exc

    if threads == 1:
        results = [guarded(j) for j in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(guarded, range(B)))
    rows, diags, failed = [], [], []
    for j, r in enumerate(results):
        if isinstance(r, Exception):
            failed.append(j)
            log.warning("replicate %d skipped: %s", j, r)
            continue
        rows.append(r[0])
        diags.append(r[1])
    if not rows:
        raise NumericError(f"all {B} replicates failed")
    return np.vstack(rows), diags, failed


def llb_sample(loss: LossModel, data, B: int, seed: int, threads: int = 1,
               opts: OptimOptions | None = None, on_error: str = "raise",
               method: str = "llb") -> PosteriorDraws:
    """Loss-likelihood bootstrap sample of size ``B``.

    Parameters
    ----------
    loss : LossModel
    data : array_like, shape (n, obs_dim)
    B : int
        Number of replicates.
    seed : int
        Replicate ``j`` uses ``RngStream(seed, j)``; the result does not
        depend on ``threads``.
    threads : int
        Worker threads.
    opts : OptimOptions, optional
        Settings for every weighted minimization.
    on_error : {"raise", "skip"}
        ``"raise"`` stops at the first failing replicate with a
        ``ReplicateError``; ``"skip"`` drops it and lists it in ``failed``.
    """
    X = _validate(data, B, threads)
    opts = opts or OptimOptions()
    n = X.shape[0]
    # replicates restart from the ERM; the fit is re-converged so results don't depend on it
    try:
        warm, _ = fit_erm(loss, X, opts=opts)
    except NumericError as exc:
        log.info("ERM warm start unavailable (%s); using default init", exc)
        warm = loss.default_init(X)

    def task(j):
        g = dirichlet_uniform(n, RngStream(seed, j))
        theta, res = minimize_weighted_risk(loss, X, g, init=warm, opts=opts)
        return theta, res.to_dict()

    rows, diags, failed = _run_replicates(task, int(B), int(threads), on_error)
    return PosteriorDraws(rows, method, seed, None, diags, failed)


def wlb_sample(loss: LossModel, data, B: int, seed: int, threads: int = 1,
               opts: OptimOptions | None = None, on_error: str = "raise") -> PosteriorDraws:
    """Weighted likelihood bootstrap: ``llb_sample`` with a negative log-likelihood loss."""
    if not loss.is_nll:
        raise InvalidArgumentError("wlb_sample needs a negative log-likelihood loss")
    return llb_sample(loss, data, B, seed, threads, opts, on_error, method="wlb")


def mean_functional(weights: np.ndarray, data: np.ndarray) -> np.ndarray:
    return weights @ data


def bb_functional(data, functional: Callable[[np.ndarray, np.ndarray], np.ndarray] = mean_functional,
                  B: int = 1000, seed: int = 0, threads: int = 1,
                  on_error: str = "raise") -> PosteriorDraws:
    """Bayesian bootstrap of ``functional(weights, data)``.

    ``functional`` receives simplex weights and the ``(n, k)`` data array and
    returns the parameter of the weighted empirical distribution.
    """
    X = _validate(data, B, threads)
    n = X.shape[0]

    def task(j):
        g = dirichlet_uniform(n, RngStream(seed, j))
        try:
            value = np.atleast_1d(np.asarray(functional(g, X), dtype=float)).reshape(-1)
        except LossbootError:
            raise
        except Exception as exc:
            raise NumericError(f"functional failed: {exc}") from exc
        if not np.all(np.isfinite(value)):
            raise NumericError("functional returned non-finite values")
        return value, {}

    rows, diags, failed = _run_replicates(task, int(B), int(threads), on_error)
    return PosteriorDraws(rows, "bb", seed, None, diags, failed)


def llb_exact_variance(x) -> np.ndarray:
    """Exact conditional covariance of the Dirichlet-weighted mean of ``x``.

    ``x^T {I / (n (n + 1)) - 1 / (n^2 (n + 1))} x`` for the ``(n, p)`` data
    matrix, which equals ``S / (n + 1)`` with ``S`` the 1/n-normalized
    sample covariance.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]
    s = x.sum(axis=0)
    return x.T @ x / (n * (n + 1)) - np.outer(s, s) / (n * n * (n + 1))
