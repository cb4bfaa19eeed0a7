"""Loss functions with analytic gradients and Hessians.

A loss is evaluated on a batch of observations stored row-wise in a 2-D
array. Classification observations are rows ``(y, z_1, ..., z_p)`` and the
parameter is ``theta = (alpha, beta_1, ..., beta_p)``, intercept first.

All losses drop additive constants that do not depend on ``theta``; neither
weighted minimizers nor the shape of ``exp(-w * loss)`` depend on them.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .numkit import spd_inverse, symmetrize


def _phi2_linear(xi):
    xi = np.asarray(xi, dtype=float)
    z = np.zeros_like(xi)
    return 0.5 - xi, z - 1.0, z, z


def _phi2_poly(t):
    t = np.asarray(t, dtype=float)
    t2 = t * t
    t3 = t2 * t
    t4 = t2 * t2
    return (t4 * (t2 - 3.0 * t + 2.5) - t + 0.5,
            t3 * (6.0 * t2 - 15.0 * t + 10.0) - 1.0,
            30.0 * t2 * (t2 - 2.0 * t + 1.0),
            60.0 * t * (2.0 * t2 - 3.0 * t + 1.0))


def _phi2_flat(xi):
    z = np.zeros_like(np.asarray(xi, dtype=float))
    return z, z, z, z


#: the three pieces (below 0, on [0, 1], above 1), each giving value and three derivatives
PHI2_BRANCHES = (_phi2_linear, _phi2_poly, _phi2_flat)


def phi2_derivs(xi):
    """Smoothed hinge and its first three derivatives.

    Returns ``(value, d1, d2, d3)`` arrays shaped like ``xi``. Below 0 the
    loss is ``1/2 - xi``; on ``[0, 1]`` (knots included) it is the sextic
    ``xi^6 - 3 xi^5 + 5/2 xi^4 - xi + 1/2``; above 1 it is zero.
    """
    xi = np.asarray(xi, dtype=float)
    lo = xi < 0
    hi = xi > 1
    mid = ~(lo | hi)
    poly = _phi2_poly(np.where(mid, xi, 0.0))
    lin = _phi2_linear(xi)
    return tuple(np.where(lo, a, np.where(mid, b, 0.0)) for a, b in zip(lin, poly))


def phi2_eval(xi):
    """Value, first and second derivative of the smoothed hinge at ``xi``."""
    v, d1, d2, _ = phi2_derivs(xi)
    if np.ndim(xi) == 0:
        return float(v), float(d1), float(d2)
    return v, d1, d2


class LossModel:
    """Contract for a loss ``l(theta, x)`` on batches of observations.

    Subclasses implement ``values``, ``grads`` and ``hessians``; the
    weighted reductions have generic defaults that subclasses may speed up.
    """

    #: number of parameters d
    param_dim: int
    #: number of columns per observation row
    obs_dim: int
    name: str = "loss"
    #: True when the loss is a negative log-likelihood
    is_nll: bool = False

    # -- batch evaluators -------------------------------------------------
    def values(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grads(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessians(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def weighted_hessian(self, theta: np.ndarray, X: np.ndarray, g: np.ndarray) -> np.ndarray:
        return np.einsum("i,ijk->jk", g, self.hessians(theta, X))

    def default_init(self, X: np.ndarray) -> np.ndarray:
        return np.zeros(self.param_dim)

    # -- helpers ------------------------------------------------------------
    def check(self, theta, X) -> tuple[np.ndarray, np.ndarray]:
        """Coerce and validate ``(theta, X)``; ``X`` may be a single row."""
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.param_dim:
            raise InvalidArgumentError(
                f"{self.name}: theta has length {theta.size}, expected {self.param_dim}")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            # a 1-D array is a column of scalar observations for 1-D losses, else one row
            X = X.reshape(-1, 1) if self.obs_dim == 1 else X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.obs_dim:
            raise InvalidArgumentError(
                f"{self.name}: observations have shape {X.shape}, expected (n, {self.obs_dim})")
        return theta, X

    def scaled(self, c: float) -> "LossModel":
        return ScaledLoss(self, c)

    def describe(self) -> dict:
        return {"name": self.name, "param_dim": self.param_dim}


class _PrecisionQuadratic(LossModel):
    """``1/2 (x - theta)^T P (x - theta)`` for a fixed SPD precision ``P``."""

    def __init__(self, precision: np.ndarray):
        self.precision = symmetrize(precision)
        self.param_dim = self.obs_dim = self.precision.shape[0]

    def values(self, theta, X):
        theta, X = self.check(theta, X)
        r = X - theta
        return 0.5 * np.einsum("ij,jk,ik->i", r, self.precision, r)

    def grads(self, theta, X):
        theta, X = self.check(theta, X)
        return -(X - theta) @ self.precision

    def hessians(self, theta, X):
        theta, X = self.check(theta, X)
        return np.broadcast_to(self.precision, (X.shape[0],) + self.precision.shape).copy()

    def weighted_hessian(self, theta, X, g):
        return float(np.sum(g)) * self.precision

    def default_init(self, X):
        return np.asarray(X, dtype=float).mean(axis=0)


class QuadraticLoss(_PrecisionQuadratic):
    """Quadratic loss ``1/2 (x - theta)^T S^{-1} (x - theta)`` with loss covariance ``S``."""

    name = "quadratic"

    def __init__(self, sigma1):
        self.sigma1 = symmetrize(np.atleast_2d(np.asarray(sigma1, dtype=float)))
        super().__init__(spd_inverse(self.sigma1))

    def describe(self):
        return {"name": self.name, "param_dim": self.param_dim, "sigma1": self.sigma1.tolist()}


class NormalNllLoss(_PrecisionQuadratic):
    """Scaled negative log-density of ``N(theta, sigma)`` with known ``sigma``.

    ``l = c * (-log N(x | theta, sigma))`` minus the log-normalizer. When the
    data really are ``N(theta0, sigma)``, the calibrated loss scale is
    ``1 / c``.
    """

    name = "nll-normal"
    is_nll = True

    def __init__(self, sigma, c: float = 1.0):
        if not (np.isfinite(c) and c > 0):
            raise InvalidArgumentError(f"scale c must be positive, got {c}")
        self.sigma = symmetrize(np.atleast_2d(np.asarray(sigma, dtype=float)))
        self.c = float(c)
        super().__init__(self.c * spd_inverse(self.sigma))

    def describe(self):
        return {"name": self.name, "param_dim": self.param_dim,
                "sigma": self.sigma.tolist(), "c": self.c}


class SmoothHingeLoss(LossModel):
    """Smoothed hinge on the margin ``y * (alpha + beta^T z)``."""

    name = "smooth-hinge"

    def __init__(self, p: int):
        if int(p) != p or p < 1:
            raise InvalidArgumentError(f"number of covariates must be >= 1, got {p}")
        self.p = int(p)
        self.param_dim = self.obs_dim = self.p + 1

    def _parts(self, theta, X):
        theta, X = self.check(theta, X)
        y = X[:, 0]
        U = np.column_stack([np.ones(X.shape[0]), X[:, 1:]])
        return theta, y, U, y * (U @ theta)

    def values(self, theta, X):
        _, _, _, xi = self._parts(theta, X)
        return phi2_derivs(xi)[0]

    def grads(self, theta, X):
        _, y, U, xi = self._parts(theta, X)
        return (phi2_derivs(xi)[1] * y)[:, None] * U

    def hessians(self, theta, X):
        _, _, U, xi = self._parts(theta, X)
        return phi2_derivs(xi)[2][:, None, None] * (U[:, :, None] * U[:, None, :])

    def weighted_hessian(self, theta, X, g):
        _, _, U, xi = self._parts(theta, X)
        H = (U * (g * phi2_derivs(xi)[2])[:, None]).T @ U
        return 0.5 * (H + H.T)

    def describe(self):
        return {"name": self.name, "param_dim": self.param_dim, "covariates": self.p}


class ScaledLoss(LossModel):
    """``c * base`` for a positive constant ``c``."""

    def __init__(self, base: LossModel, c: float):
        if not (np.isfinite(c) and c > 0):
            raise InvalidArgumentError(f"scale must be positive, got {c}")
        self.base = base
        self.c = float(c)
        self.param_dim = base.param_dim
        self.obs_dim = base.obs_dim
        self.name = f"{c:g}*{base.name}"

    def values(self, theta, X):
        return self.c * self.base.values(theta, X)

    def grads(self, theta, X):
        return self.c * self.base.grads(theta, X)

    def hessians(self, theta, X):
        return self.c * self.base.hessians(theta, X)

    def weighted_hessian(self, theta, X, g):
        return self.c * self.base.weighted_hessian(theta, X, g)

    def default_init(self, X):
        return self.base.default_init(X)

    def describe(self):
        return {"name": "scaled", "c": self.c, "base": self.base.describe(),
                "param_dim": self.param_dim}


def loss_value(model: LossModel, theta, x) -> float:
    """Loss at a single observation ``x``."""
    return float(model.values(theta, x)[0])


def loss_grad(model: LossModel, theta, x) -> np.ndarray:
    """Gradient in ``theta`` at a single observation."""
    return model.grads(theta, x)[0]


def loss_hess(model: LossModel, theta, x) -> np.ndarray:
    """Hessian in ``theta`` at a single observation."""
    return model.hessians(theta, x)[0]


def make_loss(name: str, dim: int, cov=None, scale: float = 1.0) -> LossModel:
    """Build a loss from a CLI-style selector.

    ``dim`` is the observation width for quadratic/NLL losses and the number
    of covariates for the smooth hinge. ``cov`` is an optional covariance
    (vector of diagonal entries or full matrix), identity by default.
    """
    if name in ("quadratic", "nll-normal"):
        if cov is None:
            cov = np.eye(dim)
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (dim, dim):
            raise InvalidArgumentError(f"covariance shape {cov.shape} does not match dimension {dim}")
        if name == "quadratic":
            loss = QuadraticLoss(cov)
            return loss if scale == 1.0 else loss.scaled(scale)
        return NormalNllLoss(cov, c=scale)
    if name == "smooth-hinge":
        loss = SmoothHingeLoss(dim)
        return loss if scale == 1.0 else loss.scaled(scale)
    raise InvalidArgumentError(f"unknown loss {name!r}")
