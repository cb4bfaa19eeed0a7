"""Experiment runners that emit figure-ready tables.

Each runner returns an ``ExperimentResult`` holding named tables (header
plus rows) and a JSON-ready summary. Randomness for repetition ``r`` comes
from ``RngStream(seed, r)`` (data) and seeds derived from ``(seed, r, k)``
(samplers), so any single repetition can be re-run on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bootstrap import llb_exact_variance, llb_sample
from .calibrate import calibrate, w_quadratic_closed_form
from .classify import (BAYES_ERROR, baseline_erm, crossing_point, fit_gb, fit_llb, gen_synthetic,
                       misclass_rate, predict_linear, predict_modal, predictive_prob)
from .errors import InvalidArgumentError
from .losses import QuadraticLoss, SmoothHingeLoss
from .numkit import RngStream, derive_seed, mvn_sample
from .optimize import fit_erm

EXPERIMENTS = ("normal-quadratic", "synthetic-classify", "w-vs-n")

DEFAULT_Z_GRID = np.round(np.linspace(-3.0, 3.0, 121), 10)


@dataclass
class ExperimentResult:
    name: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _check_reps(reps):
    if int(reps) != reps or reps < 1:
        raise InvalidArgumentError(f"reps must be a positive integer, got {reps}")


def run_normal_quadratic(n: int = 5000, reps: int = 20, p: int = 2, sigma0=None, sigma1=None,
                         B: int = 200, seed: int = 0, threads: int = 1) -> ExperimentResult:
    """Normal data with a quadratic loss.

    Per repetition: the plug-in loss scale against its closed form, and the
    bootstrap's mean and covariance against the exact Dirichlet moments.
    """
    _check_reps(reps)
    sigma0 = np.eye(p) if sigma0 is None else np.atleast_2d(np.asarray(sigma0, dtype=float))
    sigma1 = np.eye(p) if sigma1 is None else np.atleast_2d(np.asarray(sigma1, dtype=float))
    loss = QuadraticLoss(sigma1)
    w_true = w_quadratic_closed_form(sigma0, sigma1)
    rows = []
    for r in range(reps):
        x = mvn_sample(np.zeros(p), sigma0, RngStream(seed, r), size=n)
        rep = calibrate(loss, x)
        draws = llb_sample(loss, x, B, derive_seed(seed, r, 1), threads)
        exact = llb_exact_variance(x)
        cov = draws.cov()
        C = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
        rows.append([
            r, n, rep.w_hat, w_true,
            float(np.max(np.abs(draws.mean() - x.mean(axis=0)))),
            float(np.trace(cov) / np.trace(exact)),
            float(np.trace(exact)),
            float((n - 1) / (n * (n + 1)) * np.trace(sigma0)),
            float(np.linalg.norm(n * cov - C) / np.linalg.norm(C)),
        ])
    arr = np.array([row[2:] for row in rows], dtype=float)
    header = ["rep", "n", "w_hat", "w_closed_form", "llb_mean_abs_dev", "llb_var_ratio",
              "exact_var_trace", "expected_var_trace", "sandwich_rel_err"]
    summary = {
        "n": n, "reps": reps, "p": p, "B": B, "seed": seed,
        "w_closed_form": w_true,
        "w_hat_mean": float(arr[:, 0].mean()),
        "w_hat_sd": float(arr[:, 0].std(ddof=1)) if reps > 1 else 0.0,
        "llb_var_ratio_mean": float(arr[:, 3].mean()),
        "exact_var_trace_mean": float(arr[:, 4].mean()),
        "expected_var_trace": float(arr[0, 5]),
    }
    return ExperimentResult("normal-quadratic", {"metrics": (header, rows)}, summary)


def run_synthetic_classify(n: int = 100, n_test: int = 10000, B: int = 1000, reps: int = 20,
                           seed: int = 0, ridge: float = 1.0, burnin: int | None = None,
                           z_grid=None, threads: int = 1) -> ExperimentResult:
    """Smoothed-hinge classification on the two-Gaussian synthetic problem.

    Per repetition: misclassification of the LLB and general-Bayes modal
    classifiers and of the penalized ERM baseline on a fresh test set,
    plus predictive-probability curves averaged over repetitions.
    """
    _check_reps(reps)
    z_grid = DEFAULT_Z_GRID if z_grid is None else np.asarray(z_grid, dtype=float)
    rows = []
    curve_gb = np.zeros(z_grid.size)
    curve_llb = np.zeros(z_grid.size)
    first_draws = {}
    for r in range(reps):
        train = gen_synthetic(n, RngStream(seed, r))
        test = gen_synthetic(n_test, RngStream(derive_seed(seed, r, 2), 0))
        llb = fit_llb(train, B, derive_seed(seed, r, 1), threads)
        gb, report = fit_gb(train, B, derive_seed(seed, r, 3), burnin=burnin)
        alpha, beta = baseline_erm(train, ridge)
        m_llb = misclass_rate(predict_modal(llb, test.z), test.y)
        m_gb = misclass_rate(predict_modal(gb, test.z), test.y)
        m_base = misclass_rate(predict_linear(alpha, beta, test.z), test.y)
        p_gb = predictive_prob(gb, z_grid)
        p_llb = predictive_prob(llb, z_grid)
        curve_gb += p_gb / reps
        curve_llb += p_llb / reps
        rows.append([r, n, report.w_hat, m_llb, m_gb, m_base,
                     m_llb - m_base, m_gb - m_base, crossing_point(z_grid, p_gb)])
        if r == 0:
            first_draws = {"draws_llb": llb.posterior.draws, "draws_gb": gb.posterior.draws}
    header = ["rep", "n", "w_hat", "misclass_llb", "misclass_gb", "misclass_baseline",
              "llb_minus_baseline", "gb_minus_baseline", "gb_crossing_z"]
    arr = np.array([row[2:] for row in rows], dtype=float)
    curves = [[float(z), float(a), float(b)] for z, a, b in zip(z_grid, curve_gb, curve_llb)]
    summary = {
        "n": n, "n_test": n_test, "B": B, "reps": reps, "seed": seed, "baseline_ridge": ridge,
        "bayes_error": BAYES_ERROR,
        "w_hat_mean": float(arr[:, 0].mean()),
        "misclass_llb_mean": float(arr[:, 1].mean()),
        "misclass_gb_mean": float(arr[:, 2].mean()),
        "misclass_baseline_mean": float(arr[:, 3].mean()),
        "gb_curve_crossing_z": crossing_point(z_grid, curve_gb),
        "gb_curve_band_width": band_width(z_grid, curve_gb),
    }
    tables = {"metrics": (header, rows),
              "predictive_curve": (["z", "prob_gb", "prob_llb"], curves)}
    for name, draws in first_draws.items():
        tables[name] = (["alpha", "beta"], [[float(v) for v in row] for row in draws])
    return ExperimentResult("synthetic-classify", tables, summary)


def band_width(z_grid, prob, lo: float = 0.25, hi: float = 0.75) -> float:
    """Width of the ``z`` interval over which an increasing curve climbs from ``lo`` to ``hi``."""
    return crossing_point(z_grid, prob, hi) - crossing_point(z_grid, prob, lo)


def synthetic_w_hat(n: int, stream: RngStream) -> float:
    train = gen_synthetic(n, stream)
    loss = SmoothHingeLoss(1)
    X = train.observations()
    theta, _ = fit_erm(loss, X)
    return calibrate(loss, X, theta_hat=theta).w_hat


def run_w_vs_n(n_grid=(100, 1000), reps: int = 50, seed: int = 0) -> ExperimentResult:
    """Plug-in loss scale for the synthetic smoothed-hinge problem over a grid of ``n``."""
    _check_reps(reps)
    rows = []
    summary = {"reps": reps, "seed": seed, "by_n": {}}
    for k, n in enumerate(n_grid):
        ws = np.array([synthetic_w_hat(int(n), RngStream(derive_seed(seed, k), r)) for r in range(reps)])
        rows += [[int(n), r, float(w)] for r, w in enumerate(ws)]
        q = np.quantile(ws, [0.0, 0.25, 0.5, 0.75, 1.0])
        summary["by_n"][str(int(n))] = {
            "mean": float(ws.mean()), "sd": float(ws.std(ddof=1)) if reps > 1 else 0.0,
            "min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4]),
        }
    return ExperimentResult("w-vs-n", {"w_hat": (["n", "rep", "w_hat"], rows)}, summary)
