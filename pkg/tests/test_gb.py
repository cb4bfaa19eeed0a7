import math

import numpy as np
import pytest
from scipy.stats import ks_2samp, norm

from lossboot.calibrate import calibrate
from lossboot.errors import InvalidArgumentError, McmcInitError
from lossboot.gb import (GaussianPrior, McmcConfig, gb_log_posterior, gb_quadratic_conjugate,
                         gb_sample, make_log_posterior, mcse, rwm_sample)
from lossboot.losses import QuadraticLoss


def std_normal(theta):
    return -0.5 * float(theta @ theta)


@pytest.fixture
def x2():
    return np.random.default_rng(30).normal([1.0, -1.0], [1.0, 2.0], size=(200, 2))


def test_prior_logpdf_matches_scipy():
    prior = GaussianPrior((0.5, -1.0), (2.0, 0.3))
    th = np.array([0.1, -0.7])
    assert prior.logpdf(th) == pytest.approx(norm.logpdf(th, prior.mean, prior.sd).sum(), rel=1e-13)


def test_prior_validation():
    with pytest.raises(InvalidArgumentError):
        GaussianPrior((0.0,), (0.0,))
    with pytest.raises(InvalidArgumentError):
        GaussianPrior((0.0, 1.0), (1.0,))


def test_log_posterior_linear_in_w(x2):
    prior = GaussianPrior.isotropic(2)
    loss = QuadraticLoss(np.eye(2))
    th = np.array([0.3, 0.2])
    f1 = gb_log_posterior(prior, loss, 1.5, x2, th)
    f2 = gb_log_posterior(prior, loss, 3.0, x2, th)
    assert f2 - f1 == pytest.approx(-1.5 * loss.values(th, x2).sum(), rel=1e-12)


def test_log_posterior_edge_cases():
    prior = GaussianPrior.isotropic(2, 0.0, 3.0)
    loss = QuadraticLoss(np.eye(2))
    th = np.array([1.0, 2.0])
    assert gb_log_posterior(prior, loss, 1.0, np.empty((0, 2)), th) == prior.logpdf(th)
    assert gb_log_posterior(prior, loss, 1.0, th[None, :], th) == prior.logpdf(th)
    with pytest.raises(InvalidArgumentError):
        gb_log_posterior(prior, loss, 0.0, th[None, :], th)


def test_rwm_standard_normal():
    chain = rwm_sample(std_normal, McmcConfig(B=20_000, init=np.zeros(1), seed=1))
    assert abs(chain.draws.mean()) <= 0.05
    assert 0.85 <= chain.draws.var() <= 1.15


def test_rwm_point_mass():
    sd = 1e-6
    mode = np.array([2.0, -3.0])
    lp = lambda th: -0.5 * float(np.sum((th - mode) ** 2)) / sd**2
    chain = rwm_sample(lp, McmcConfig(B=2000, init=mode, seed=2))
    assert np.max(np.abs(chain.draws - mode)) <= 1e-5


def test_rwm_acceptance_2d():
    cov = np.array([[1.0, 0.8], [0.8, 2.0]])
    P = np.linalg.inv(cov)
    chain = rwm_sample(lambda th: -0.5 * float(th @ P @ th),
                       McmcConfig(B=5000, init=np.zeros(2), seed=3))
    assert 0.1 <= chain.acceptance_rate <= 0.5
    assert chain.step_scales


def test_rwm_non_finite_init():
    with pytest.raises(McmcInitError):
        rwm_sample(lambda th: -math.inf, McmcConfig(B=10, init=np.zeros(1)))


def test_mcmc_config_validation():
    with pytest.raises(InvalidArgumentError):
        McmcConfig(B=0)
    with pytest.raises(InvalidArgumentError):
        McmcConfig(B=5, target_accept=1.0)
    assert McmcConfig(B=7).burnin == 7


def test_conjugate_flat_prior(x2):
    sigma1 = np.array([[1.0, 0.3], [0.3, 2.0]])
    w = 0.7
    mean, cov = gb_quadratic_conjugate(GaussianPrior.isotropic(2, 0.0, 1e6), sigma1, w, x2)
    xbar = x2.mean(axis=0)
    np.testing.assert_allclose(mean, xbar, rtol=1e-3)
    np.testing.assert_allclose(cov, sigma1 / (len(x2) * w), rtol=1e-3)


def test_conjugate_matches_normal_location_bayes(x2):
    sigma0 = np.diag([1.0, 4.0])
    prior = GaussianPrior((0.5, -0.5), (2.0, 3.0))
    mean, cov = gb_quadratic_conjugate(prior, sigma0, 1.0, x2)
    # textbook normal-normal update, written out independently
    P0 = np.diag(1.0 / np.array(prior.sd) ** 2)
    Pn = P0 + len(x2) * np.linalg.inv(sigma0)
    cov_ref = np.linalg.inv(Pn)
    mean_ref = cov_ref @ (P0 @ np.array(prior.mean) + np.linalg.solve(sigma0, x2.sum(axis=0)))
    np.testing.assert_allclose(mean, mean_ref, rtol=1e-12)
    np.testing.assert_allclose(cov, cov_ref, rtol=1e-12)


def test_conjugate_no_data():
    prior = GaussianPrior((1.0, 2.0), (0.5, 3.0))
    mean, cov = gb_quadratic_conjugate(prior, np.eye(2), 1.0, np.empty((0, 2)))
    np.testing.assert_allclose(mean, [1.0, 2.0])
    np.testing.assert_allclose(cov, np.diag([0.25, 9.0]))


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_conjugate_invariant_under_recalibrated_scale(c, x2):
    prior = GaussianPrior.isotropic(2)
    s1 = np.array([[1.0, 0.2], [0.2, 0.5]])
    w = calibrate(QuadraticLoss(s1), x2).w_hat
    wc = calibrate(QuadraticLoss(s1 / c), x2).w_hat
    assert wc * c == pytest.approx(w, rel=1e-8)
    # QuadraticLoss(s1 / c) is the quadratic loss scaled by c
    m1, c1 = gb_quadratic_conjugate(prior, s1, w, x2)
    m2, c2 = gb_quadratic_conjugate(prior, s1 / c, w / c, x2)
    np.testing.assert_allclose(m2, m1, rtol=1e-12)
    np.testing.assert_allclose(c2, c1, rtol=1e-12)


def test_mcmc_matches_conjugate(x2):
    prior = GaussianPrior.isotropic(2, 0.0, 10.0)
    loss = QuadraticLoss(np.eye(2))
    w = 0.8
    chain = gb_sample(prior, loss, w, x2, B=20_000, seed=4, init=x2.mean(axis=0))
    mean, cov = gb_quadratic_conjugate(prior, np.eye(2), w, x2)
    assert np.all(np.abs(chain.draws.mean(axis=0) - mean) <= 3 * mcse(chain.draws))
    emp = np.cov(chain.draws, rowvar=False)
    assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) <= 0.10


def test_gb_asymptotic_shape():
    n = 2000
    sigma1 = np.array([[1.0, 0.4], [0.4, 2.0]])
    x = np.random.default_rng(31).normal(size=(n, 2))
    w = 1.7
    chain = gb_sample(GaussianPrior.isotropic(2, 0.0, 1e3), QuadraticLoss(sigma1), w, x,
                      B=20_000, seed=5, init=x.mean(axis=0))
    target = sigma1 / w
    got = n * np.cov(chain.draws, rowvar=False)
    assert np.linalg.norm(got - target) / np.linalg.norm(target) <= 0.10


def test_kept_draws_do_not_depend_on_adapt_window():
    lp = lambda th: -0.5 * float(th @ th) / 4.0
    a = rwm_sample(lp, McmcConfig(B=20_000, init=np.zeros(1), seed=6, adapt_window=20))
    b = rwm_sample(lp, McmcConfig(B=20_000, init=np.zeros(1), seed=6, adapt_window=200))
    assert ks_2samp(a.draws[:, 0], b.draws[:, 0]).statistic <= 0.05


def test_gb_sample_deterministic(x2):
    prior = GaussianPrior.isotropic(2)
    loss = QuadraticLoss(np.eye(2))
    a = gb_sample(prior, loss, 1.0, x2, B=500, seed=9)
    b = gb_sample(prior, loss, 1.0, x2, B=500, seed=9)
    assert a.draws.tobytes() == b.draws.tobytes()
    post = a.to_posterior()
    assert post.method == "gb-mcmc" and post.w == 1.0


def test_make_log_posterior(x2):
    prior = GaussianPrior.isotropic(2)
    loss = QuadraticLoss(np.eye(2))
    f = make_log_posterior(prior, loss, 2.0, x2)
    th = np.array([0.1, 0.1])
    assert f(th) == gb_log_posterior(prior, loss, 2.0, x2, th)


def test_mcse_iid():
    x = np.random.default_rng(7).normal(size=(10_000, 1))
    assert mcse(x)[0] == pytest.approx(0.01, rel=0.25)
