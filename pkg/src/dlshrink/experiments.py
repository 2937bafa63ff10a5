"""Replicated squared-error comparisons on simulated normal-means data.

Each (signal, replicate) cell owns a seed ``split(base_seed, i)`` and derives
separate streams for the data and for every method, so results do not depend
on execution order or on how many worker processes run the cells.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .priors import DirichletLaplace, Horseshoe, SparseTruth, bayesian_lasso
from .rngdist import InvalidParameterError, RngStream
from .samplers import McmcConfig, lasso_soft_threshold, pm_exact_posterior, run_chain

CSV_COLUMNS = ("method", "n", "q", "A", "replicate", "sq_error", "seconds", "seed")
AGGREGATE_COLUMNS = ("method", "n", "q", "A", "replicates", "mean_sq_error", "se_sq_error")

TABLE1_DEFAULTS = dict(design="table1", n=100, q=5, A=[7.0], methods=["BL", "DL_1/n", "HS", "LS", "PM"],
                       replicates=20)
TABLE2_DEFAULTS = dict(design="table2", n=1000, q=100, A=[2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
                       methods=["BL", "HS", "DL_1/n", "DL_1/2"], replicates=10, big_count=10,
                       big_value=10.0)


def split(base_seed: int, i: int) -> int:
    """Child seed for replicate ``i``: a 64-bit hash of ``(base_seed, i)``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(base_seed).to_bytes(8, "little"))
    h.update(int(i).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def _tag_id(*parts) -> int:
    h = hashlib.blake2b("|".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def parse_method(tag: str):
    """Map a method tag to a prior spec, or to the strings "PM" / "LS"."""
    if tag == "BL":
        return bayesian_lasso()
    if tag == "HS":
        return Horseshoe()
    if tag in ("PM", "LS"):
        return tag
    if tag.startswith("DL_"):
        a = tag[3:]
        if a == "1/n":
            return DirichletLaplace("1/n")
        try:
            val = float(a) if "/" not in a else float(a.split("/")[0]) / float(a.split("/")[1])
        except (ValueError, ZeroDivisionError):
            raise InvalidParameterError(f"bad DL tag {tag!r}") from None
        return DirichletLaplace(val)
    raise InvalidParameterError(f"unknown method tag {tag!r}; use BL, HS, PM, LS or DL_<a>")


@dataclass
class ExperimentConfig:
    design: str = "table1"
    n: int = 100
    q: int = 5
    A: list = field(default_factory=lambda: [7.0])
    methods: list = field(default_factory=lambda: list(TABLE1_DEFAULTS["methods"]))
    replicates: int = 20
    n_iter: int = 3000
    n_burnin: int = 1000
    thin: int = 1
    base_seed: int = 2013
    kappa: float = 0.1
    lasso_lambda: float | None = None
    big_count: int = 0
    big_value: float = 10.0
    out: str | None = None

    def __post_init__(self):
        if not isinstance(self.A, list):
            self.A = [self.A]
        self.A = [float(a) for a in self.A]
        self.validate()

    def validate(self) -> None:
        if self.design not in ("table1", "table2", "custom"):
            raise InvalidParameterError(f"design must be table1, table2 or custom, got {self.design!r}")
        if self.n < 1 or not 0 <= self.q <= self.n:
            raise InvalidParameterError("need n >= 1 and 0 <= q <= n")
        if not 0 <= self.big_count <= self.q:
            raise InvalidParameterError("need 0 <= big_count <= q")
        if self.replicates < 1:
            raise InvalidParameterError("replicates must be >= 1")
        if not self.A:
            raise InvalidParameterError("at least one signal value A is needed")
        if not self.methods:
            raise InvalidParameterError("at least one method is needed")
        for m in self.methods:
            parse_method(m)
        McmcConfig(self.n_iter, self.n_burnin, self.thin)
        if not 0 <= self.base_seed < 2 ** 64:
            raise InvalidParameterError("base_seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, d: dict, defaults: dict | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown config fields: {sorted(unknown)}")
        merged = {**(defaults or {}), **d}
        if "mcmc" in merged:
            raise InvalidParameterError("use n_iter / n_burnin / thin at the top level")
        return cls(**merged)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def truth(self, A: float) -> SparseTruth:
        theta = np.zeros(self.n)
        theta[: self.big_count] = self.big_value
        theta[self.big_count: self.q] = A
        return SparseTruth.from_vector(theta)

    def mcmc(self) -> McmcConfig:
        return McmcConfig(self.n_iter, self.n_burnin, self.thin)


@dataclass(frozen=True)
class ResultRow:
    method: str
    n: int
    q: int
    A: float
    replicate: int
    sq_error: float
    seconds: float
    seed: int


def _fit_one(tag: str, y, truth: SparseTruth, cfg: ExperimentConfig, seed: int, A: float) -> float:
    method = parse_method(tag)
    if method == "LS":
        est = lasso_soft_threshold(y, cfg.lasso_lambda)
        return float(np.sum((est - truth.to_vector()) ** 2))
    if method == "PM":
        return float(pm_exact_posterior(y, cfg.kappa, truth=truth).squared_error)
    m = cfg.mcmc()
    rng = RngStream(seed, _tag_id("method", tag, A))
    return float(run_chain(method, y, m, truth, rng=rng).squared_error)


def run_cell(cfg_dict: dict, A: float, replicate: int):
    """Simulate one dataset and fit every method; returns (rows, failures)."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    seed = split(cfg.base_seed, replicate)
    truth = cfg.truth(A)
    y = truth.to_vector() + RngStream(seed, _tag_id("data", A)).normal(cfg.n)
    rows, failures = [], []
    for tag in cfg.methods:
        t0 = time.perf_counter()
        try:
            se = _fit_one(tag, y, truth, cfg, seed, A)
        except Exception as exc:  # noqa: BLE001 - one failed fit must not end the batch
            failures.append({"method": tag, "A": A, "replicate": replicate, "seed": seed,
                             "error": f"{type(exc).__name__}: {exc}",
                             "traceback": traceback.format_exc(limit=3)})
            continue
        rows.append(ResultRow(tag, cfg.n, cfg.q, A, replicate, se, time.perf_counter() - t0, seed))
    return rows, failures


def run_experiment(cfg: ExperimentConfig, workers: int = 1):
    """All cells, ordered by (A, replicate, method) regardless of ``workers``."""
    jobs = [(cfg.to_dict(), A, r) for A in cfg.A for r in range(cfg.replicates)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run_cell, *zip(*jobs)))
    else:
        parts = [run_cell(*j) for j in jobs]
    order = {m: i for i, m in enumerate(cfg.methods)}
    rows = sorted((r for p in parts for r in p[0]),
                  key=lambda r: (cfg.A.index(r.A), r.replicate, order[r.method]))
    failures = [f for p in parts for f in p[1]]
    return rows, failures


def aggregate(rows, cfg: ExperimentConfig) -> list[dict]:
    out = []
    for A in cfg.A:
        for m in cfg.methods:
            v = np.array([r.sq_error for r in rows if r.A == A and r.method == m])
            out.append({
                "method": m, "n": cfg.n, "q": cfg.q, "A": A, "replicates": int(v.size),
                "mean_sq_error": float(v.mean()) if v.size else math.nan,
                "se_sq_error": float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan,
            })
    return out


def _header(cfg: ExperimentConfig) -> str:
    return f"# config_hash={cfg.config_hash()} base_seed={cfg.base_seed} design={cfg.design}\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return "NA" if math.isnan(x) else repr(x)
    return str(x)


def rows_to_csv(rows, cfg: ExperimentConfig, timing: bool = False) -> str:
    """Per-replicate CSV.  Without ``timing`` the seconds column is NA so that
    reruns are byte-identical; wall times then go to the timing sidecar."""
    buf = io.StringIO()
    buf.write(_header(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.method, r.n, r.q, _fmt(r.A), r.replicate, _fmt(r.sq_error),
                    _fmt(r.seconds) if timing else "NA", r.seed])
    return buf.getvalue()


def timing_to_csv(rows, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "A", "replicate", "seconds"))
    for r in rows:
        w.writerow([r.method, _fmt(r.A), r.replicate, f"{r.seconds:.3f}"])
    return buf.getvalue()


def aggregate_to_csv(agg, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(_header(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for a in agg:
        w.writerow([_fmt(a[c]) if isinstance(a[c], float) else a[c] for c in AGGREGATE_COLUMNS])
    return buf.getvalue()


def write_outputs(rows, failures, cfg: ExperimentConfig, out: str | Path, timing: bool = False) -> dict:
    """Write the replicate CSV, aggregate CSV, timing sidecar and JSON summary."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("")
    agg = aggregate(rows, cfg)
    paths = {
        "replicates": out,
        "aggregate": Path(f"{stem}.aggregate.csv"),
        "timing": Path(f"{stem}.timing.csv"),
        "summary": Path(f"{stem}.summary.json"),
    }
    paths["replicates"].write_text(rows_to_csv(rows, cfg, timing))
    paths["aggregate"].write_text(aggregate_to_csv(agg, cfg))
    paths["timing"].write_text(timing_to_csv(rows, cfg))
    summary = {
        "config_hash": cfg.config_hash(),
        "base_seed": cfg.base_seed,
        "config": cfg.to_dict(),
        "aggregate": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in a.items()}
                      for a in agg],
        "failures": [{k: v for k, v in f.items() if k != "traceback"} for f in failures],
    }
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()}


def replicate_table1(cfg: ExperimentConfig, workers: int = 1):
    if cfg.design != "table1":
        raise InvalidParameterError("replicate_table1 needs design = table1")
    return run_experiment(cfg, workers)


def replicate_table2(cfg: ExperimentConfig, workers: int = 1):
    if cfg.design != "table2":
        raise InvalidParameterError("replicate_table2 needs design = table2")
    return run_experiment(cfg, workers)
