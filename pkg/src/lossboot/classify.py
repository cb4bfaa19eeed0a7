"""Linear binary classification with the smoothed hinge loss.

Labels are ``-1``/``+1``. A posterior over ``theta = (alpha, beta)`` is
fit by the loss-likelihood bootstrap or by the calibrated general-Bayes
posterior; a new point is classified by the majority of per-draw
predictions ``sign(alpha + beta^T z)`` with ``sign(0) = +1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .bootstrap import PosteriorDraws, llb_sample
from .calibrate import calibrate
from .errors import DataError, InvalidArgumentError
from .gb import GaussianPrior, gb_sample
from .losses import SmoothHingeLoss
from .numkit import RngStream
from .optimize import OptimOptions, fit_erm

#: misclassification rate of the optimal rule for the synthetic problem
BAYES_ERROR = float(norm.cdf(-1.0))


@dataclass
class LabeledDataset:
    z: np.ndarray
    y: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if z.ndim != 2 or z.shape[0] != y.size:
            raise DataError(f"{y.size} labels but covariates of shape {z.shape}")
        if y.size < 1:
            raise DataError("dataset is empty")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(z)):
            raise DataError("covariates must be finite")
        self.z, self.y = z, y
        if not self.names:
            self.names = tuple(f"z{k + 1}" for k in range(z.shape[1]))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.z.shape[1]

    def observations(self) -> np.ndarray:
        """Rows ``(y, z_1, ..., z_p)`` as consumed by ``SmoothHingeLoss``."""
        return np.column_stack([self.y, self.z])

    @classmethod
    def from_csv_text(cls, text: str) -> "LabeledDataset":
        """Parse CSV with a header; column ``y`` holds labels in {-1, 1} or {0, 1}."""
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if not rows:
            raise DataError("CSV is empty")
        header = [h.strip() for h in rows[0]]
        if "y" not in header:
            raise DataError("CSV header must contain a label column named 'y'")
        try:
            body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise DataError(f"non-numeric CSV entry: {exc}") from exc
        if body.ndim != 2 or body.shape[0] == 0 or body.shape[1] != len(header):
            raise DataError("CSV rows must match the header width and be non-empty")
        k = header.index("y")
        y = body[:, k]
        if np.all(np.isin(y, (0.0, 1.0))) and np.any(y == 0.0):
            y = np.where(y == 0.0, -1.0, 1.0)
        cols = [j for j in range(len(header)) if j != k]
        if not cols:
            raise DataError("CSV has no covariate columns")
        return cls(body[:, cols], y, tuple(header[j] for j in cols))


@dataclass(frozen=True)
class Standardization:
    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, z) -> "Standardization":
        z = np.asarray(z, dtype=float)
        sd = z.std(axis=0)
        return cls(z.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def apply(self, z) -> np.ndarray:
        return (np.asarray(z, dtype=float) - self.center) / self.scale

    def to_raw(self, theta) -> np.ndarray:
        """Map draws on standardized covariates to draws on raw covariates."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        beta = theta[:, 1:] / self.scale
        alpha = theta[:, 0] - beta @ self.center
        return np.column_stack([alpha, beta])


@dataclass
class ClassifierPosterior:
    posterior: PosteriorDraws
    standardization: Standardization | None = None

    @property
    def raw_draws(self) -> np.ndarray:
        """Draws of ``(alpha, beta)`` acting on raw covariates."""
        th = self.posterior.draws
        return th if self.standardization is None else self.standardization.to_raw(th)

    def scores(self, z_star) -> np.ndarray:
        """``alpha_j + beta_j^T z`` for every draw ``j`` (rows) and point (columns)."""
        z = np.asarray(z_star, dtype=float)
        th = self.posterior.draws
        if self.standardization is not None:
            z = self.standardization.apply(z.reshape(-1, th.shape[1] - 1))
        z = z.reshape(-1, th.shape[1] - 1)
        return th[:, :1] + th[:, 1:] @ z.T


def gen_synthetic(n: int, rng: RngStream | np.random.Generator) -> LabeledDataset:
    """``y`` uniform on {-1, +1} and ``z | y ~ N(y, 1)``."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    y = np.where(gen.random(int(n)) < 0.5, -1.0, 1.0)
    z = y + gen.standard_normal(int(n))
    return LabeledDataset(z.reshape(-1, 1), y)


def _sign(s):
    return np.where(s >= 0, 1.0, -1.0)


def predict_modal(post: ClassifierPosterior, z_star) -> np.ndarray | float:
    """Majority vote of per-draw labels; ties go to +1."""
    votes = _sign(post.scores(z_star)).sum(axis=0)
    labels = np.where(votes >= 0, 1.0, -1.0)
    z = np.asarray(z_star, dtype=float)
    if z.ndim <= 1 and labels.size == 1:
        return float(labels[0])
    return labels


def predictive_prob(post: ClassifierPosterior, z_grid) -> np.ndarray:
    """Fraction of draws with ``alpha + beta^T z > 0`` at each grid point."""
    return (post.scores(z_grid) > 0).mean(axis=0)


def misclass_rate(predictions, truth) -> float:
    pred = np.asarray(predictions, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.size != truth.size:
        raise InvalidArgumentError(f"length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise InvalidArgumentError("need at least one prediction")
    return float(np.mean(pred != truth))


def hinge_opts(n: int, ridge: float = 0.0, p: int = 1, **kw) -> OptimOptions:
    """Optimizer options for a penalty ``(ridge / 2) ||beta||^2`` on the summed loss.

    The optimizer works on the weighted mean, so the penalty is divided by
    ``n``; the intercept is left unpenalized.
    """
    return OptimOptions(ridge=ridge / n, ridge_mask=(0.0,) + (1.0,) * p, **kw)


def baseline_erm(data: LabeledDataset, ridge: float):
    """Penalized smoothed-hinge fit ``sum_i phi2(...) + (ridge / 2) ||beta||^2``.

    Returns ``(alpha, beta)``.
    """
    if not ridge > 0:
        raise InvalidArgumentError(f"ridge must be positive, got {ridge}")
    loss = SmoothHingeLoss(data.p)
    theta, _ = fit_erm(loss, data.observations(), opts=hinge_opts(data.n, ridge, data.p))
    return float(theta[0]), theta[1:].copy()


def predict_linear(alpha: float, beta, z) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1, np.size(beta))
    return _sign(alpha + z @ np.asarray(beta).reshape(-1))


def _prepare(data: LabeledDataset, standardize: bool):
    if standardize:
        st = Standardization.fit(data.z)
        return LabeledDataset(st.apply(data.z), data.y, data.names), st
    return data, None


def fit_llb(data: LabeledDataset, B: int, seed: int, threads: int = 1, ridge: float = 0.0,
            standardize: bool = False, on_error: str = "raise") -> ClassifierPosterior:
    fit, st = _prepare(data, standardize)
    loss = SmoothHingeLoss(fit.p)
    draws = llb_sample(loss, fit.observations(), B, seed, threads,
                       opts=hinge_opts(fit.n, ridge, fit.p), on_error=on_error)
    return ClassifierPosterior(draws, st)


def fit_gb(data: LabeledDataset, B: int, seed: int, w: float | None = None,
           prior: GaussianPrior | None = None, burnin: int | None = None,
           ridge: float = 0.0, standardize: bool = False):
    """Calibrated general-Bayes posterior; ``w`` defaults to the plug-in estimate.

    Returns ``(ClassifierPosterior, CalibrationReport)``. A positive
    ``ridge`` only affects the fit used for calibration.
    """
    fit, st = _prepare(data, standardize)
    loss = SmoothHingeLoss(fit.p)
    X = fit.observations()
    report = calibrate(loss, X, opts=hinge_opts(fit.n, ridge, fit.p))
    if w is None:
        w = report.w_hat
    prior = prior or GaussianPrior.isotropic(loss.param_dim, 0.0, 10.0)
    chain = gb_sample(prior, loss, w, X, B, seed, burnin=burnin, init=report.theta_hat)
    return ClassifierPosterior(chain.to_posterior(), st), report


def crossing_point(z_grid, prob, level: float = 0.5) -> float:
    """First ``z`` where the (increasing) curve ``prob`` reaches ``level``, by linear interpolation."""
    z = np.asarray(z_grid, dtype=float)
    p = np.asarray(prob, dtype=float)
    idx = np.flatnonzero(p >= level)
    if idx.size == 0:
        return math.inf
    k = idx[0]
    if k == 0:
        return float(z[0])
    z0, z1, p0, p1 = z[k - 1], z[k], p[k - 1], p[k]
    return float(z0 + (level - p0) * (z1 - z0) / (p1 - p0))
