"""Empirical information matrices, sandwich covariance and the loss scale.

The loss scale matches the trace of the precision of the general-Bayes
asymptotic normal (``w * J``) to that of the bootstrap's (``J I^-1 J``)::

    w_hat = tr(J_n I_n^-1 J_n^T) / tr(J_n)

with ``I_n`` the mean outer product of per-observation gradients and
``J_n`` the mean Hessian, both at the empirical risk minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NotPositiveDefiniteError, NumericError, SingularMatrixError
from .losses import LossModel
from .numkit import cholesky, spd_inverse, symmetrize
from .optimize import OptimOptions, fit_erm

# pivot threshold, relative to the largest diagonal entry, below which I_n is singular
SINGULAR_RTOL = 1e-12


def _pairwise_sum(a: np.ndarray) -> np.ndarray:
    # fixed-shape tree reduction over axis 0: the result does not depend on chunking
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:])])
        a = a[0::2] + a[1::2]
    return a[0]


def empirical_information(loss: LossModel, data, theta) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(I_n, J_n)`` at ``theta``.

    ``I_n = mean_i grad_i grad_i^T`` and ``J_n = mean_i hess_i``.
    """
    theta, X = loss.check(theta, data)
    n = X.shape[0]
    if n < 1:
        raise InvalidArgumentError("need at least one observation")
    G = loss.grads(theta, X)
    H = loss.hessians(theta, X)
    I_n = _pairwise_sum(G[:, :, None] * G[:, None, :]) / n
    J_n = _pairwise_sum(H) / n
    return 0.5 * (I_n + I_n.T), 0.5 * (J_n + J_n.T)


def sandwich_covariance(I_n, J_n) -> np.ndarray:
    """``J^-1 I J^-1``, the asymptotic covariance of ``sqrt(n)`` times the bootstrap spread."""
    I_n = symmetrize(I_n)
    J_n = symmetrize(J_n)
    if I_n.shape != J_n.shape:
        raise InvalidArgumentError(f"shape mismatch {I_n.shape} vs {J_n.shape}")
    try:
        cond = np.linalg.cond(J_n)
    except np.linalg.LinAlgError:  # pragma: no cover
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError("J_n", f"J_n is singular (condition number {cond:.3g})")
    Jinv = np.linalg.solve(J_n, np.eye(J_n.shape[0]))
    S = Jinv @ I_n @ Jinv.T
    return 0.5 * (S + S.T)


def _w_from_matrices(I_n, J_n) -> float:
    trJ = float(np.trace(J_n))
    if not trJ > 0:
        raise NumericError(
            f"tr(J_n) = {trJ:.3g} <= 0: the fit is not at a minimum with positive curvature "
            "(non-convex stationary point?)")
    try:
        cholesky(I_n, pivot_rtol=SINGULAR_RTOL)
    except NotPositiveDefiniteError as exc:
        raise SingularMatrixError(
            "I_n", f"I_n is singular (pivot {exc.pivot}); collect more data than parameters "
            "or check that the loss gradient varies across observations") from exc
    Iinv = spd_inverse(I_n)
    return float(np.trace(J_n @ Iinv @ J_n.T)) / trJ


def w_hat(loss: LossModel, data, theta_hat) -> float:
    """Plug-in loss scale at the empirical risk minimizer ``theta_hat``."""
    I_n, J_n = empirical_information(loss, data, theta_hat)
    return _w_from_matrices(I_n, J_n)


def w_quadratic_closed_form(sigma0, sigma1) -> float:
    """Loss scale for the quadratic loss with data covariance ``sigma0``: tr(S0^-1) / tr(S1^-1)."""
    s0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    s1 = np.atleast_2d(np.asarray(sigma1, dtype=float))
    if s0.shape != s1.shape:
        raise InvalidArgumentError(f"shape mismatch {s0.shape} vs {s1.shape}")
    return float(np.trace(spd_inverse(s0)) / np.trace(spd_inverse(s1)))


@dataclass
class CalibrationReport:
    theta_hat: np.ndarray
    I_n: np.ndarray
    J_n: np.ndarray
    sandwich: np.ndarray
    w_hat: float
    n: int
    loss: dict = field(default_factory=dict)
    ridge: float = 0.0

    def to_dict(self) -> dict:
        def mat(m):
            m = np.atleast_2d(m)
            return {"rows": m.shape[0], "cols": m.shape[1], "data": [float(v) for v in m.ravel()]}

        return {
            "n": int(self.n),
            "loss": self.loss,
            "ridge": float(self.ridge),
            "theta_hat": [float(v) for v in self.theta_hat],
            "I_n": mat(self.I_n),
            "J_n": mat(self.J_n),
            "sandwich": mat(self.sandwich),
            "w_hat": float(self.w_hat),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        def mat(m):
            return np.asarray(m["data"], dtype=float).reshape(m["rows"], m["cols"])

        return cls(np.asarray(d["theta_hat"], dtype=float), mat(d["I_n"]), mat(d["J_n"]),
                   mat(d["sandwich"]), float(d["w_hat"]), int(d["n"]), d.get("loss", {}),
                   float(d.get("ridge", 0.0)))


def calibrate(loss: LossModel, data, opts: OptimOptions | None = None, theta_hat=None) -> CalibrationReport:
    """Fit the ERM (unless given) and bundle ``I_n``, ``J_n``, sandwich and ``w_hat``.

    With a ridge penalty in ``opts`` the fit, and so ``theta_hat``, is the
    penalized minimizer; the information matrices still use the bare loss.
    """
    X = np.asarray(data, dtype=float)
    opts = opts or OptimOptions()
    if theta_hat is None:
        theta_hat, _ = fit_erm(loss, X, opts=opts)
    theta_hat = np.asarray(theta_hat, dtype=float)
    I_n, J_n = empirical_information(loss, X, theta_hat)
    w = _w_from_matrices(I_n, J_n)
    S = sandwich_covariance(I_n, J_n)
    return CalibrationReport(theta_hat, I_n, J_n, S, w, X.shape[0], loss.describe(), opts.ridge)
