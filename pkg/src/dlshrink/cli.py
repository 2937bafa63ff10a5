"""Command-line entry point: ``dlshrink <subcommand> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from .concentration import (
    ConcentrationQuery,
    UnsupportedPriorError,
    concentration_exact,
    concentration_mc,
)
from .experiments import (
    TABLE1_DEFAULTS,
    TABLE2_DEFAULTS,
    ExperimentConfig,
    parse_method,
    run_experiment,
    write_outputs,
)
from .priors import (
    DirichletLaplace,
    Exponential,
    GlobalLocal,
    GlobalOnly,
    HalfCauchy,
    Horseshoe,
    IidNormal,
    InverseGamma,
    PointMassMixture,
    SparseTruth,
    bayesian_lasso,
    sample_theta_prior,
)
from .rngdist import InvalidParameterError, RngStream
from .samplers import lasso_soft_threshold, pm_exact_posterior, run_chain
from .verify import PERTURB_TARGETS, reports_to_json, run_verification_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return _json_safe(x.item())
    return x


# ---------------------------------------------------------------------------
# prior tags
# ---------------------------------------------------------------------------

PRIOR_TAGS = ("iid_normal", "global_ig", "global_halfcauchy", "global_exp", "bl", "bl_variance",
              "dl", "hs", "pm")


def parse_prior(tag: str):
    """``dl`` is DL with a = 1/n; ``dl:0.5`` sets a explicitly."""
    if tag == "iid_normal":
        return IidNormal(1.0)
    if tag == "global_ig":
        return GlobalOnly(InverseGamma(1.0, 1.0))
    if tag == "global_halfcauchy":
        return GlobalOnly(HalfCauchy())
    if tag == "global_exp":
        return GlobalOnly(Exponential(1.0))
    if tag == "bl":
        return bayesian_lasso()
    if tag == "bl_variance":
        return GlobalLocal(HalfCauchy(on_sqrt=False), 0.5)
    if tag == "hs":
        return Horseshoe()
    if tag == "pm":
        return PointMassMixture(0.1)
    if tag == "dl":
        return DirichletLaplace("1/n")
    if tag.startswith("dl:"):
        try:
            return DirichletLaplace(float(tag[3:]))
        except ValueError:
            raise ConfigError(f"bad DL tag {tag!r}") from None
    raise ConfigError(f"unknown prior {tag!r}; choose from {', '.join(PRIOR_TAGS)} or dl:<a>")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _load_config(args, defaults: dict) -> ExperimentConfig:
    d: dict = {}
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in ("replicates", "n_iter", "n_burnin", "n", "q"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if args.A is not None:
        d["A"] = args.A
    if args.methods is not None:
        d["methods"] = args.methods.split(",")
    if args.seed is not None:
        d["base_seed"] = args.seed
    if args.out is not None:
        d["out"] = args.out
    return ExperimentConfig.from_dict(d, defaults)


def _replicate(args, defaults: dict) -> int:
    cfg = _load_config(args, defaults)
    out = cfg.out or f"{cfg.design}.csv"
    rows, failures = run_experiment(cfg, workers=args.workers)
    paths = write_outputs(rows, failures, cfg, out, timing=args.timing)
    agg_lines = Path(paths["aggregate"]).read_text()
    sys.stderr.write(agg_lines)
    if failures:
        sys.stderr.write(f"{len(failures)} method fits failed; see {paths['summary']}\n")
    return EXIT_OK


def cmd_replicate_table1(args) -> int:
    return _replicate(args, TABLE1_DEFAULTS)


def cmd_replicate_table2(args) -> int:
    return _replicate(args, TABLE2_DEFAULTS)


def _truth_from_args(args) -> SparseTruth:
    value = args.signal
    if value is None:
        value = math.sqrt(2 * math.log(args.n))
    return SparseTruth.constant(args.n, args.q, value)


def _estimate(spec, truth, t, args, rng):
    if t == 0:
        return {"log_prob": "-inf", "ci_low": "-inf", "ci_high": "-inf", "method": "exact",
                "n_samples": 0, "flags": ["empty_ball"]}
    q = ConcentrationQuery(spec, truth, t)
    if args.estimator == "mc":
        est = concentration_mc(q, args.n_samples, rng, workers=args.workers)
    else:
        est = concentration_exact(q)
    return _json_safe(est.to_dict())


def cmd_concentration(args) -> int:
    if args.t is not None and args.delta is not None:
        raise ConfigError("give either --t or --delta, not both")
    t = args.t if args.t is not None else args.n ** ((args.delta if args.delta is not None else 0.5) / 2)
    if t < 0:
        raise ConfigError("t must be >= 0")
    truth = _truth_from_args(args)
    seed = args.seed if args.seed is not None else 0
    spec = parse_prior(args.prior)
    report = {
        "prior": args.prior, "n": args.n, "q": args.q, "signal": truth.values[0] if truth.q else 0.0,
        "t": t, "estimator": args.estimator, "seed": seed,
        "estimate": _estimate(spec, truth, t, args, RngStream(seed, 1)),
    }
    if args.compare:
        other = _estimate(parse_prior(args.compare), truth, t, args, RngStream(seed, 2))
        report["compare"] = {"prior": args.compare, "estimate": other}
        a, b = report["estimate"]["log_prob"], other["log_prob"]
        if isinstance(a, float) and isinstance(b, float):
            report["log_ratio"] = a - b
            report["ratio"] = math.exp(a - b) if a - b < 700 else "inf"
        else:
            report["log_ratio"] = None
    report["config_hash"] = _hash({k: v for k, v in report.items() if k not in ("estimate", "compare")})
    _emit(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _read_vector(path: str) -> np.ndarray:
    vals = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    vals.append(float(row[0]))
                except ValueError:
                    if vals:
                        raise
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not vals:
        raise ConfigError(f"{path} holds no numbers")
    return np.asarray(vals)


def cmd_fit(args) -> int:
    y = _read_vector(args.y)
    truth = SparseTruth.from_vector(_read_vector(args.truth)) if args.truth else None
    if truth is not None and truth.n != y.size:
        raise ConfigError("truth and y differ in length")
    seed = args.seed if args.seed is not None else 0
    method = parse_method(args.method)
    if method == "LS":
        med = lasso_soft_threshold(y)
        se = None if truth is None else float(np.sum((med - truth.to_vector()) ** 2))
        kept = 0
    elif method == "PM":
        fit = pm_exact_posterior(y, 0.1, truth=truth)
        med, se, kept = fit.posterior_median, fit.squared_error, 0
    else:
        from .samplers import McmcConfig

        cfg = McmcConfig(args.n_iter, args.n_burnin, 1, seed, 0)
        fit = run_chain(method, y, cfg, truth)
        med, se, kept = fit.posterior_median, fit.squared_error, fit.kept_draws
    report = {"method": args.method, "n": int(y.size), "seed": seed, "kept_draws": kept,
              "squared_error": se, "posterior_median": [float(v) for v in med],
              "config_hash": _hash({"method": args.method, "seed": seed, "n_iter": args.n_iter,
                                    "n_burnin": args.n_burnin, "y": y.tolist()})}
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_sample_prior(args) -> int:
    seed = args.seed if args.seed is not None else 0
    spec = parse_prior(args.prior)
    draws = sample_theta_prior(spec, args.n, RngStream(seed, 3), size=args.draws)
    lines = [f"# config_hash={_hash({'prior': args.prior, 'n': args.n, 'draws': args.draws, 'seed': seed})}"
             f" seed={seed} prior={args.prior}",
             ",".join(f"theta{j + 1}" for j in range(args.n))]
    lines += [",".join(repr(float(v)) for v in row) for row in draws]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify_math(args) -> int:
    seed = args.seed if args.seed is not None else 20240101
    reports = run_verification_suite(seed=seed, n_points=args.n_points, perturb=args.perturb)
    text = reports_to_json(reports, seed=seed, perturb=args.perturb,
                           config_hash=_hash({"seed": seed, "n_points": args.n_points,
                                              "perturb": args.perturb}))
    _emit(text + "\n", args.out)
    failed = [r.name for r in reports if not r.passed]
    for name in failed:
        sys.stderr.write(f"FAILED {name}\n")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dlshrink", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="base seed (unsigned 64-bit)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
        sp.add_argument("--out", default=None, help="output path (default: stdout or <design>.csv)")

    for name, fn in (("replicate-table1", cmd_replicate_table1), ("replicate-table2", cmd_replicate_table2)):
        sp = sub.add_parser(name, help=f"squared-error comparison ({name[10:]} design)")
        common(sp)
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--q", type=int)
        sp.add_argument("--A", type=float, nargs="+")
        sp.add_argument("--methods", help="comma separated, e.g. BL,HS,DL_1/n,DL_0.5,PM,LS")
        sp.add_argument("--n-iter", dest="n_iter", type=int)
        sp.add_argument("--n-burnin", dest="n_burnin", type=int)
        sp.add_argument("--timing", action="store_true",
                        help="write wall times into the seconds column (breaks byte-identical reruns)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("concentration", help="prior small-ball probability")
    common(sp)
    sp.add_argument("--prior", required=True, help=f"one of {', '.join(PRIOR_TAGS)} or dl:<a>")
    sp.add_argument("--compare", help="second prior for a paired query")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=int, default=1, help="number of nonzero entries of theta0")
    sp.add_argument("--signal", type=float, default=None, help="value of the nonzero entries "
                    "(default sqrt(2 log n))")
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--delta", type=float, default=None, help="t = n^(delta/2); default 0.5")
    sp.add_argument("--estimator", choices=("mc", "exact"), default="mc")
    sp.add_argument("--n-samples", dest="n_samples", type=int, default=1_000_000)
    sp.set_defaults(func=cmd_concentration)

    sp = sub.add_parser("fit", help="fit one dataset read from a CSV column")
    common(sp)
    sp.add_argument("--y", required=True, help="CSV with y values in the first column")
    sp.add_argument("--truth", help="optional CSV with the true means")
    sp.add_argument("--method", default="DL_1/n")
    sp.add_argument("--n-iter", dest="n_iter", type=int, default=3000)
    sp.add_argument("--n-burnin", dest="n_burnin", type=int, default=1000)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("sample-prior", help="joint draws of theta from a prior")
    common(sp)
    sp.add_argument("--prior", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--draws", type=int, default=1000)
    sp.set_defaults(func=cmd_sample_prior)

    sp = sub.add_parser("verify-math", help="run the numerical verification suite")
    common(sp)
    sp.add_argument("--perturb", choices=PERTURB_TARGETS, default=None,
                    help="negative control: scale one identity's right side by 1.1")
    sp.add_argument("--n-points", dest="n_points", type=int, default=1_000_000)
    sp.set_defaults(func=cmd_verify_math)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, InvalidParameterError, UnsupportedPriorError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
