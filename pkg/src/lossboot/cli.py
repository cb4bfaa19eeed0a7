"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
Configuration comes only from flags; environment variables are ignored.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io as lio
from .bootstrap import llb_sample
from .calibrate import calibrate
from .classify import LabeledDataset, Standardization, hinge_opts
from .errors import DataError, InvalidArgumentError, LossbootError, NumericError
from .experiments import EXPERIMENTS, run_normal_quadratic, run_synthetic_classify, run_w_vs_n
from .gb import GaussianPrior, gb_sample
from .losses import make_loss
from .optimize import OptimOptions

LOSSES = ("quadratic", "nll-normal", "smooth-hinge")
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(LossbootError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from exc
    if not (np.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _w(text: str):
    if text == "auto":
        return "auto"
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--w must be 'auto' or a positive number, got {text!r}") from exc
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"--w must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossboot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", required=True, type=Path, help="CSV with a header row")
            p.add_argument("--loss", required=True, choices=LOSSES)
            p.add_argument("--loss-cov", type=_floats, default=None,
                           help="diagonal loss covariance for quadratic / nll-normal (default identity)")
            p.add_argument("--loss-scale", type=float, default=1.0,
                           help="positive multiplier of the loss (c for nll-normal)")
            p.add_argument("--ridge", type=_nonneg, default=0.0,
                           help="penalty (ridge/2)||beta||^2 on the summed loss (smooth-hinge: intercept excluded)")
            p.add_argument("--standardize", choices=("on", "off"), default="on",
                           help="z-score covariates for smooth-hinge (ignored otherwise)")
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--threads", type=_positive_int, default=1)
        p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("llb", help="loss-likelihood bootstrap draws")
    common(p)
    p.add_argument("--B", type=_positive_int, default=1000)
    p.add_argument("--on-error", choices=("raise", "skip"), default="raise",
                   help="divergent replicates: stop (default) or skip and report")

    p = sub.add_parser("calibrate", help="information matrices, sandwich and loss scale")
    common(p)

    p = sub.add_parser("gb", help="general-Bayes posterior by adaptive random-walk Metropolis")
    common(p)
    p.add_argument("--B", type=_positive_int, default=1000)
    p.add_argument("--burnin", type=int, default=None, help="discarded draws (default B)")
    p.add_argument("--w", type=_w, default="auto")
    p.add_argument("--prior-mean", type=_floats, default=[0.0])
    p.add_argument("--prior-sd", type=_floats, default=[10.0])

    p = sub.add_parser("experiment", help="run a named study")
    p.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    common(p, data=False)
    p.add_argument("--reps", type=_positive_int, default=None)
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--n-grid", type=_ints, default=None)
    p.add_argument("--n-test", type=_positive_int, default=10000)
    p.add_argument("--p", type=_positive_int, default=2)
    p.add_argument("--B", type=_positive_int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--ridge", type=_nonneg, default=1.0, help="baseline penalty (synthetic-classify)")
    return parser


# -- data loading ----------------------------------------------------------

def _load(args):
    try:
        raw = args.data.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {args.data}: {exc}") from exc
    try:
        text = lio.canonical_bytes(raw).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataError(f"{args.data} is not UTF-8 text") from exc
    digest = lio.dataset_digest(raw)
    if args.loss == "smooth-hinge":
        ds = LabeledDataset.from_csv_text(text)
        st = Standardization.fit(ds.z) if args.standardize == "on" else None
        if st is not None:
            ds = LabeledDataset(st.apply(ds.z), ds.y, ds.names)
        loss = make_loss("smooth-hinge", ds.p, scale=args.loss_scale)
        opts = hinge_opts(ds.n, args.ridge, ds.p)
        return loss, ds.observations(), opts, st, digest
    _, X = lio.read_numeric_csv(text)
    cov = None
    if args.loss_cov is not None:
        cov = args.loss_cov * X.shape[1] if len(args.loss_cov) == 1 else args.loss_cov
    try:
        loss = make_loss(args.loss, X.shape[1], cov=cov, scale=args.loss_scale)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc
    opts = OptimOptions(ridge=args.ridge / X.shape[0])
    return loss, X, opts, None, digest


def _flags(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "verbose":
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


class _Run:
    def __init__(self, args, digest=None):
        self.args = args
        self.out = Path(args.out)
        self.digest = digest
        self.artifacts = []
        self.t0 = time.perf_counter()

    def write(self, name: str, text: str):
        lio.write_text(self.out / name, text)
        self.artifacts.append(name)

    def envelope(self, payload: dict) -> dict:
        return {"manifest": "manifest.json", **payload}

    def finish(self):
        manifest = {
            "command": self.args.command,
            "flags": _flags(self.args),
            "seed": self.args.seed,
            "dataset_digest": self.digest,
            "artifacts": list(self.artifacts),
            "wall_clock_seconds": time.perf_counter() - self.t0,
        }
        lio.write_text(self.out / "manifest.json", lio.dumps(manifest))


def _standardization_meta(st):
    if st is None:
        return None
    return {"center": st.center.tolist(), "scale": st.scale.tolist()}


# -- commands ----------------------------------------------------------------

def cmd_llb(args) -> str:
    loss, X, opts, st, digest = _load(args)
    run = _Run(args, digest)
    draws = llb_sample(loss, X, args.B, args.seed, args.threads, opts=opts, on_error=args.on_error,
                       method="wlb" if loss.is_nll else "llb")
    rows = draws.draws if st is None else st.to_raw(draws.draws)
    run.write("draws.csv", lio.draws_csv(rows))
    run.write("draws.json", lio.dumps(run.envelope({
        **draws.metadata(), "loss": loss.describe(), "draws_csv": "draws.csv",
        "standardization": _standardization_meta(st), "coordinates": "raw"})))
    run.finish()
    extra = f", {len(draws.failed)} replicates skipped" if draws.failed else ""
    return f"{draws.method}: {draws.B} draws x {draws.d} -> {run.out / 'draws.csv'} (seed {args.seed}{extra})"


def cmd_calibrate(args) -> str:
    loss, X, opts, st, digest = _load(args)
    run = _Run(args, digest)
    report = calibrate(loss, X, opts=opts)
    payload = report.to_dict()
    payload["ridge"] = args.ridge
    payload["standardization"] = _standardization_meta(st)
    run.write("report.json", lio.dumps(run.envelope(payload)))
    run.finish()
    return f"calibrate: w_hat={lio.fmt(report.w_hat)} n={report.n} d={loss.param_dim} -> {run.out / 'report.json'}"


def _prior(args, d) -> GaussianPrior:
    mean = args.prior_mean * d if len(args.prior_mean) == 1 else args.prior_mean
    sd = args.prior_sd * d if len(args.prior_sd) == 1 else args.prior_sd
    if len(mean) != d or len(sd) != d:
        raise UsageError(f"--prior-mean/--prior-sd need 1 or {d} values")
    try:
        return GaussianPrior(tuple(mean), tuple(sd))
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc


def cmd_gb(args) -> str:
    if args.burnin is not None and args.burnin < 0:
        raise UsageError("--burnin must be >= 0")
    loss, X, opts, st, digest = _load(args)
    prior = _prior(args, loss.param_dim)
    run = _Run(args, digest)
    report = calibrate(loss, X, opts=opts)
    w = report.w_hat if args.w == "auto" else float(args.w)
    if args.w == "auto":
        run.write("report.json", lio.dumps(run.envelope(report.to_dict())))
    chain = gb_sample(prior, loss, w, X, args.B, args.seed, burnin=args.burnin, init=report.theta_hat)
    rows = chain.draws if st is None else st.to_raw(chain.draws)
    post = chain.to_posterior()
    run.write("draws.csv", lio.draws_csv(rows))
    run.write("draws.json", lio.dumps(run.envelope({
        **post.metadata(), "acceptance_rate": chain.acceptance_rate,
        "burnin": args.B if args.burnin is None else args.burnin,
        "prior": {"mean": list(prior.mean), "sd": list(prior.sd)},
        "w_source": "auto" if args.w == "auto" else "flag",
        "loss": loss.describe(), "draws_csv": "draws.csv",
        "standardization": _standardization_meta(st), "coordinates": "raw"})))
    run.finish()
    return (f"gb: {args.B} draws x {loss.param_dim} w={lio.fmt(w)} "
            f"acceptance={chain.acceptance_rate:.3f} -> {run.out / 'draws.csv'}")


def cmd_experiment(args) -> str:
    if args.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}")
    if args.burnin is not None and args.burnin < 0:
        raise UsageError("--burnin must be >= 0")
    run = _Run(args)
    if args.name == "normal-quadratic":
        res = run_normal_quadratic(n=args.n or 5000, reps=args.reps or 20, p=args.p,
                                   B=args.B or 200, seed=args.seed, threads=args.threads)
    elif args.name == "synthetic-classify":
        res = run_synthetic_classify(n=args.n or 100, n_test=args.n_test, B=args.B or 1000,
                                     reps=args.reps or 20, seed=args.seed, ridge=args.ridge,
                                     burnin=args.burnin, threads=args.threads)
    else:
        grid = args.n_grid or ([args.n] if args.n else [100, 1000])
        res = run_w_vs_n(n_grid=grid, reps=args.reps or 50, seed=args.seed)
    for name, (header, rows) in res.tables.items():
        run.write(f"{name}.csv", lio.table_csv(header, rows))
    run.write("summary.json", lio.dumps(run.envelope({"experiment": res.name, **res.summary})))
    run.finish()
    return f"experiment {res.name}: {len(res.tables)} tables -> {run.out}"


COMMANDS = {"llb": cmd_llb, "calibrate": cmd_calibrate, "gb": cmd_gb, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        line = COMMANDS[args.command](args)
    except (UsageError, InvalidArgumentError) as exc:
        print(f"lossboot: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"lossboot: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"lossboot: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(line)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
