"""Damped Newton minimization of weighted empirical risk.

Minimizes ``sum_i g_i l(theta, x_i) + (ridge / 2) * ||M theta||^2`` where
``g`` is a point on the simplex and ``M`` optionally masks coordinates out
of the penalty (the classifier leaves its intercept unpenalized).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (DivergenceError, InvalidArgumentError, MaxIterationsError,
                     NotPositiveDefiniteError)
from .losses import LossModel
from .numkit import cholesky

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_HALVINGS = 60
FLAT_PIVOT_RTOL = 1e-12
ROUNDING_RTOL = 1e-13


@dataclass(frozen=True)
class OptimOptions:
    max_iter: int = 200
    grad_tol: float = 1e-8
    damping: float = 1e-6
    ridge: float = 0.0
    divergence_norm: float = 1e6
    # boolean mask of penalized coordinates; None penalizes all of them
    ridge_mask: tuple | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        for name in ("grad_tol", "damping", "divergence_norm"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.ridge >= 0:
            raise InvalidArgumentError("ridge must be >= 0")


@dataclass
class OptimResult:
    """Diagnostics of one minimization."""

    converged: bool
    iterations: int
    grad_norm: float
    objective: float
    trace: list = field(default_factory=list)
    damping: float = 0.0

    def to_dict(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations,
                "grad_norm": self.grad_norm, "objective": self.objective}


class _Objective:
    def __init__(self, loss, X, g, opts):
        self.loss, self.X, self.g = loss, X, g
        d = loss.param_dim
        if opts.ridge_mask is None:
            self.mask = np.ones(d)
        else:
            self.mask = np.asarray(opts.ridge_mask, dtype=float)
            if self.mask.shape != (d,):
                raise InvalidArgumentError(f"ridge_mask must have length {d}")
        self.ridge = opts.ridge

    def value(self, theta):
        pen = 0.5 * self.ridge * float(np.sum(self.mask * theta * theta))
        return float(self.g @ self.loss.values(theta, self.X)) + pen

    def grad(self, theta):
        return self.g @ self.loss.grads(theta, self.X) + self.ridge * self.mask * theta

    def hess(self, theta):
        return self.loss.weighted_hessian(theta, self.X, self.g) + np.diag(self.ridge * self.mask)


def minimize_weighted_risk(loss: LossModel, data, weights, init=None,
                           opts: OptimOptions | None = None):
    """Minimize the weighted risk ``sum_i weights[i] * loss(theta, data[i])``.

    Uses Newton steps on ``H + lam * I`` with Armijo backtracking (halving).
    ``lam`` is multiplied by 10 after a failed step and divided by 2 after
    an accepted one. When ``H + lam * I`` is not positive definite the
    steepest-descent direction is used instead.

    Parameters
    ----------
    loss : LossModel
    data : array_like, shape (n, obs_dim)
    weights : array_like, shape (n,)
        Nonnegative weights; uniform ``1/n`` gives the empirical risk minimizer.
    init : array_like, optional
        Starting point, ``loss.default_init(data)`` if omitted.
    opts : OptimOptions, optional

    Returns
    -------
    theta : ndarray, shape (d,)
    result : OptimResult

    Raises
    ------
    MaxIterationsError
        If the gradient tolerance is not met within ``opts.max_iter`` steps.
    DivergenceError
        If ``||theta||`` exceeds ``opts.divergence_norm``, or the stationary
        point found has a singular Hessian (the minimizer is not isolated,
        as happens on separable classification data).
    """
    opts = opts or OptimOptions()
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if loss.obs_dim == 1 else X.reshape(1, -1)
    g = np.asarray(weights, dtype=float).reshape(-1)
    if X.shape[0] != g.size:
        raise InvalidArgumentError(f"{X.shape[0]} observations but {g.size} weights")
    if X.shape[0] == 0:
        raise InvalidArgumentError("empty dataset")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise InvalidArgumentError("weights must be finite and nonnegative")
    theta = np.array(loss.default_init(X) if init is None else init, dtype=float).reshape(-1)
    theta, X = loss.check(theta, X)

    obj = _Objective(loss, X, g, opts)
    lam = opts.damping
    f = obj.value(theta)
    grad = obj.grad(theta)
    trace = [f]
    it = 0
    polishing = False
    while True:
        gnorm = float(np.max(np.abs(grad)))
        if not np.isfinite(f) or not np.all(np.isfinite(theta)):
            raise DivergenceError("divergence suspected: non-finite objective or iterate")
        if np.linalg.norm(theta) > opts.divergence_norm:
            raise DivergenceError(
                f"divergence suspected: ||theta|| = {np.linalg.norm(theta):.3g} exceeds "
                f"{opts.divergence_norm:g} (separable data? consider a ridge penalty)")
        if gnorm <= opts.grad_tol:
            # one extra Newton step makes the answer insensitive to the loss scale
            polishing = True
        elif it >= opts.max_iter:
            raise MaxIterationsError(
                f"max-iterations: gradient norm {gnorm:.3g} > {opts.grad_tol:g} "
                f"after {opts.max_iter} iterations")
        else:
            it += 1
        step, slope = _direction(obj.hess(theta), grad, lam)
        cand, f_new, g_new = _line_search(obj, theta, f, gnorm, step, slope)
        if polishing:
            if cand is not None and np.max(np.abs(g_new)) < gnorm:
                theta, f, grad = cand, f_new, g_new
                trace.append(f)
            gnorm = float(np.max(np.abs(grad)))
            break
        if cand is not None:
            theta, f, grad = cand, f_new, g_new
            trace.append(f)
            lam = max(lam / 2.0, 1e-300)
        else:
            lam *= 10.0
            if lam > 1e300:
                raise MaxIterationsError(f"max-iterations: line search stalled at gradient norm {gnorm:.3g}")

    _check_isolated(obj.hess(theta))
    return theta, OptimResult(True, it, gnorm, f, trace, lam)


def _direction(H, grad, lam):
    d = grad.size
    try:
        step = cho_solve(cho_factor(H + lam * np.eye(d), lower=True), -grad)
    except LinAlgError:
        step = -grad
    slope = float(grad @ step)
    if not slope < 0:
        step = -grad
        slope = -float(grad @ grad)
    return step, slope


def _line_search(obj, theta, f, gnorm, step, slope):
    """Armijo backtracking by halving; returns ``(theta, f, grad)`` or ``(None, None, None)``."""
    t = 1.0
    tiny = ROUNDING_RTOL * max(1.0, abs(f))
    for _ in range(MAX_HALVINGS):
        cand = theta + t * step
        f_new = obj.value(cand)
        if f_new <= f + ARMIJO_C * t * slope:
            return cand, f_new, obj.grad(cand)
        # predicted decrease is below the resolution of f: judge the step by the gradient
        if -t * slope <= tiny and f_new <= f + tiny:
            g_new = obj.grad(cand)
            if np.max(np.abs(g_new)) < gnorm:
                return cand, f_new, g_new
        t *= 0.5
    return None, None, None


def _check_isolated(H):
    if not np.any(H):
        raise DivergenceError(
            "divergence suspected: the objective has zero curvature at the returned "
            "point, so its minimizer is not isolated (separable data? consider a ridge penalty)")
    try:
        cholesky(H, pivot_rtol=FLAT_PIVOT_RTOL)
    except NotPositiveDefiniteError as exc:
        raise DivergenceError(
            f"divergence suspected: the Hessian is singular at the returned point "
            f"(pivot {exc.pivot}), so the minimizer is not isolated "
            "(separable data? consider a ridge penalty)") from exc


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def fit_erm(loss: LossModel, data, opts: OptimOptions | None = None, init=None):
    """Empirical risk minimizer (uniform weights)."""
    X = np.asarray(data, dtype=float)
    return minimize_weighted_risk(loss, X, uniform_weights(X.shape[0]), init=init, opts=opts)
