"""Acceptance criteria, each checked at its stated tolerance and runtime budget.

Every test prints one ``criterion N PASS|FAIL`` line; the lines are also
collected in the ``acceptance criteria`` section of the pytest summary.
"""

import json

import numpy as np

from lossboot.bootstrap import llb_exact_variance, llb_sample
from lossboot.calibrate import calibrate, w_hat, w_quadratic_closed_form
from lossboot.classify import BAYES_ERROR, crossing_point
from lossboot.cli import main
from lossboot.experiments import band_width, run_synthetic_classify, run_w_vs_n
from lossboot.gb import GaussianPrior, gb_quadratic_conjugate, gb_sample, mcse
from lossboot.losses import (PHI2_BRANCHES, NormalNllLoss, QuadraticLoss, SmoothHingeLoss,
                             loss_grad, loss_value)
from lossboot.numkit import RngStream, mvn_sample
from lossboot.optimize import fit_erm
from oracles import fd_grad, fd_jacobian, rel_err, smooth_hinge_points


def test_c01_phi2_smoothness(criterion):
    linear, poly, flat = PHI2_BRANCHES
    with criterion(1, "smoothed hinge is C3 at the knots", 1.0) as c:
        worst = 0.0
        for knot, outer in [(0.0, linear), (1.0, flat)]:
            a = np.array(outer(np.float64(knot)), dtype=float)
            b = np.array(poly(np.float64(knot)), dtype=float)
            worst = max(worst, float(np.max(np.abs(a - b))))
        c.check(worst <= 1e-12, f"max branch mismatch {worst:.2e} <= 1e-12")


def test_c02_derivative_oracles(criterion):
    rng = np.random.default_rng(2024)
    with criterion(2, "analytic gradients/Hessians vs central differences", 5.0) as c:
        cov = np.array([[1.5, 0.4, 0.0], [0.4, 1.0, 0.2], [0.0, 0.2, 0.5]])
        cases = {
            "quadratic": (QuadraticLoss(cov), [(rng.normal(size=3), rng.normal(size=3)) for _ in range(100)]),
            "nll-normal": (NormalNllLoss(cov), [(rng.normal(size=3), rng.normal(size=3)) for _ in range(100)]),
            "smooth-hinge": (SmoothHingeLoss(2), smooth_hinge_points(rng, 100, p=2)),
        }
        for name, (loss, points) in cases.items():
            g_err = h_err = 0.0
            for theta, x in points:
                g = loss_grad(loss, theta, x)
                H = loss.hessians(theta, np.atleast_2d(x))[0]
                g_err = max(g_err, rel_err(g, fd_grad(lambda t: loss_value(loss, t, x), theta)))
                h_err = max(h_err, rel_err(H, fd_jacobian(lambda t: loss_grad(loss, t, x), theta)))
            c.check(g_err <= 1e-5, f"{name} grad {g_err:.1e}")
            c.check(h_err <= 1e-4, f"{name} hess {h_err:.1e}")


def test_c03_llb_moments(criterion):
    n, B = 1000, 4000
    x = np.random.default_rng(3).normal(1.0, 2.0, size=(n, 1))
    with criterion(3, "LLB mean and exact conditional variance (p=1)", 30.0) as c:
        d = llb_sample(QuadraticLoss(np.eye(1)), x, B, seed=3)
        dev = abs(d.mean()[0] - x.mean())
        bound = 3 * x.std(ddof=1) / np.sqrt(B)
        exact = llb_exact_variance(x)[0, 0]
        ratio = d.cov()[0, 0] / exact
        c.check(dev <= bound, f"|mean - xbar| {dev:.2e} <= {bound:.2e}")
        c.check(abs(ratio - 1) <= 0.10, f"var/exact {ratio:.4f}")


def test_c04_sandwich(criterion):
    n, B = 2000, 4000
    sigma0 = np.array([[2.0, 0.6], [0.6, 1.0]])
    x = mvn_sample(np.zeros(2), sigma0, RngStream(4), size=n)
    with criterion(4, "n cov(LLB draws) matches the sandwich (p=2)", 60.0) as c:
        d = llb_sample(QuadraticLoss(np.array([[1.0, 0.3], [0.3, 0.8]])), x, B, seed=4)
        C = np.cov(x, rowvar=False, bias=True)
        err = np.linalg.norm(n * d.cov() - C) / np.linalg.norm(C)
        c.check(err <= 0.10, f"relative Frobenius error {err:.4f}")


def test_c05_w_hat_recovery(criterion):
    n = 10_000
    with criterion(5, "plug-in w recovers w0 for a well-specified NLL", 60.0) as c:
        for scale, w0 in [(1.0, 1.0), (2.0, 0.5)]:
            loss = NormalNllLoss(np.eye(1), c=scale)
            ws = []
            for s in range(20):
                x = RngStream(500, s).generator().normal(0.3, 1.0, size=(n, 1))
                theta, _ = fit_erm(loss, x)
                ws.append(w_hat(loss, x, theta))
            m = float(np.mean(ws))
            c.check(abs(m - w0) <= 0.05 * w0, f"c={scale:g}: mean w_hat {m:.4f} vs {w0}")


def test_c06_closed_forms(criterion):
    with criterion(6, "closed-form loss scale for quadratic losses", 1.0) as c:
        s0 = np.array([[2.0, 0.5], [0.5, 1.0]])
        c.check(w_quadratic_closed_form(s0, s0) == 1.0, "equal covariances -> 1")
        for w0 in [0.25, 3.0]:
            got = w_quadratic_closed_form(s0, w0 * s0)
            c.check(abs(got - w0) <= 1e-14 * w0, f"sigma1 = {w0:g} sigma0 -> {got!r}")
        sig2 = np.array([0.5, 2.0, 4.0])
        got = w_quadratic_closed_form(np.diag(sig2), np.eye(3))
        want = float(np.mean(1 / sig2))
        c.check(abs(got - want) <= 1e-15, f"diagonal sigma0 -> average precision {got!r}")


def test_c07_scale_invariance(criterion):
    rng = np.random.default_rng(7)
    x = rng.normal([0.5, -0.5], [1.0, 2.0], size=(300, 2))
    y = np.where(rng.random(300) < 0.5, -1.0, 1.0)
    hinge = np.column_stack([y, y + rng.normal(size=300)])
    s1 = np.array([[1.0, 0.2], [0.2, 0.5]])
    prior = GaussianPrior.isotropic(2, 0.0, 10.0)
    with criterion(7, "w_hat(c l) c = w_hat(l) and invariant GB posterior", 5.0) as c:
        for cc in [0.1, 10.0]:
            for name, loss, X in [("quadratic", QuadraticLoss(s1), x),
                                  ("nll-normal", NormalNllLoss(s1), x),
                                  ("smooth-hinge", SmoothHingeLoss(1), hinge)]:
                theta, _ = fit_erm(loss, X)
                a = w_hat(loss, X, theta)
                b = w_hat(loss.scaled(cc), X, theta)
                err = abs(b * cc - a) / a
                c.check(err <= 1e-8, f"{name} c={cc:g} {err:.1e}")
            w = calibrate(QuadraticLoss(s1), x).w_hat
            wc = calibrate(QuadraticLoss(s1 / cc), x).w_hat
            m1, c1 = gb_quadratic_conjugate(prior, s1, w, x)
            m2, c2 = gb_quadratic_conjugate(prior, s1 / cc, wc, x)
            err = max(rel_err(m2, m1, 1e-300), rel_err(c2, c1, 1e-300))
            c.check(err <= 1e-12, f"conjugate c={cc:g} {err:.1e}")


def test_c08_mcmc_vs_conjugate(criterion):
    x = mvn_sample(np.array([1.0, -1.0]), np.array([[1.0, 0.3], [0.3, 2.0]]), RngStream(8), size=100)
    prior = GaussianPrior.isotropic(2, 0.0, 10.0)
    s1 = np.array([[1.0, -0.2], [-0.2, 0.6]])
    with criterion(8, "adaptive RWM vs conjugate GB posterior (d=2)", 60.0) as c:
        loss = QuadraticLoss(s1)
        rep = calibrate(loss, x)
        chain = gb_sample(prior, loss, rep.w_hat, x, B=20_000, seed=8, init=rep.theta_hat)
        mean, cov = gb_quadratic_conjugate(prior, s1, rep.w_hat, x)
        z = np.abs(chain.draws.mean(axis=0) - mean) / mcse(chain.draws)
        err = np.linalg.norm(np.cov(chain.draws, rowvar=False) - cov) / np.linalg.norm(cov)
        c.check(np.all(z <= 3), f"mean deviation in MC-SE {np.round(z, 2).tolist()}")
        c.check(err <= 0.10, f"covariance relative Frobenius {err:.4f}")


def test_c09_classifier_end_to_end(criterion):
    with criterion(9, "synthetic classifier: error, boundary, steepening", 300.0) as c:
        small = run_synthetic_classify(n=100, n_test=10_000, B=1000, reps=5, seed=90)
        large = run_synthetic_classify(n=1000, n_test=10_000, B=1000, reps=5, seed=91)
        header, rows = small.tables["metrics"]
        for col in ["misclass_llb", "misclass_gb"]:
            vals = np.array([r[header.index(col)] for r in rows])
            worst = float(np.max(np.abs(vals - BAYES_ERROR)))
            c.check(worst <= 0.03, f"{col} max |err - Phi(-1)| {worst:.4f} over 5 seeds")
        z_small, p_small = np.array(small.tables["predictive_curve"][1])[:, :2].T
        z_large, p_large = np.array(large.tables["predictive_curve"][1])[:, :2].T
        cross = crossing_point(z_large, p_large)
        c.check(abs(cross) <= 0.15, f"0.5 crossing at n=1000 {cross:+.4f}")
        w_small, w_large = band_width(z_small, p_small), band_width(z_large, p_large)
        c.check(w_large < w_small, f"0.25-0.75 band {w_large:.3f} (n=1000) < {w_small:.3f} (n=100)")


def test_c10_w_hat_dispersion(criterion):
    with criterion(10, "sd(w_hat) shrinks from n=100 to n=1000", 300.0) as c:
        res = run_w_vs_n(n_grid=(100, 1000), reps=50, seed=10)
        sd100 = res.summary["by_n"]["100"]["sd"]
        sd1000 = res.summary["by_n"]["1000"]["sd"]
        c.check(sd1000 < sd100, f"sd {sd1000:.4f} (n=1000) < {sd100:.4f} (n=100)")


def _cli_outputs(out):
    files = {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}
    man = json.loads((out / "manifest.json").read_text())
    man.pop("wall_clock_seconds")
    man["flags"].pop("out")
    man["flags"].pop("threads")
    return files, man


def test_c11_cli_determinism(criterion, tmp_path):
    rng = np.random.default_rng(11)
    quad = tmp_path / "quad.csv"
    quad.write_text("a,b\n" + "".join(f"{float(u)!r},{float(v)!r}\n" for u, v in rng.normal(size=(60, 2))))
    y = np.where(rng.random(80) < 0.5, -1, 1)
    hinge = tmp_path / "hinge.csv"
    hinge.write_text("y,z\n" + "".join(f"{int(a)},{float(b)!r}\n" for a, b in zip(y, y + rng.normal(size=80))))
    commands = [
        ["llb", "--data", quad, "--loss", "quadratic", "--B", 200],
        ["llb", "--data", quad, "--loss", "nll-normal", "--B", 200],
        ["llb", "--data", hinge, "--loss", "smooth-hinge", "--B", 200],
        ["calibrate", "--data", hinge, "--loss", "smooth-hinge"],
        ["calibrate", "--data", quad, "--loss", "quadratic"],
        ["gb", "--data", quad, "--loss", "quadratic", "--B", 1000],
        ["gb", "--data", hinge, "--loss", "smooth-hinge", "--B", 1000],
        ["experiment", "normal-quadratic", "--n", 200, "--reps", 2, "--B", 100],
        ["experiment", "synthetic-classify", "--n", 60, "--n-test", 500, "--B", 100, "--reps", 2],
        ["experiment", "w-vs-n", "--n-grid", "50,100", "--reps", 3],
    ]
    with criterion(11, "CLI byte determinism across runs and --threads 1/4", 60.0) as c:
        for k, cmd in enumerate(commands):
            results = []
            for run_id, threads in enumerate([1, 1, 4]):
                out = tmp_path / f"c{k}_{run_id}"
                code = main([str(a) for a in cmd] + ["--seed", "5", "--threads", str(threads), "--out", str(out)])
                if code != 0:
                    c.check(False, f"{cmd[0]} exit {code}")
                results.append(_cli_outputs(out))
            label = f"{cmd[0]} {cmd[1] if cmd[0] == 'experiment' else cmd[4]}"
            c.check(all(r == results[0] for r in results[1:]), f"{label} identical")
