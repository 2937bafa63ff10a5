from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..priors import DirichletLaplace, GlobalLocal, Horseshoe, PriorSpec, SparseTruth
from ..rngdist import InvalidParameterError, RngStream
from .dl import check_dl_tau_prior, dl_gibbs_step, dl_initial_state
from .global_local import bl_gibbs_step, hs_gibbs_step
from .point_mass import pm_posterior
from .state import ChainState


@dataclass(frozen=True)
class McmcConfig:
    """``n_iter`` counts all sweeps, burn-in included."""

    n_iter: int = 3000
    n_burnin: int = 1000
    thin: int = 1
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not (self.n_iter > self.n_burnin >= 0):
            raise InvalidParameterError("need n_iter > n_burnin >= 0")
        if self.thin < 1:
            raise InvalidParameterError("thin must be >= 1")

    @property
    def n_kept(self) -> int:
        return len(range(self.n_burnin, self.n_iter, self.thin))

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream_id)


@dataclass
class FitSummary:
    posterior_median: np.ndarray
    squared_error: float | None
    kept_draws: int
    method: str
    diagnostics: dict = field(default_factory=dict)


def squared_error(estimate, truth: SparseTruth | None) -> float | None:
    if truth is None:
        return None
    return float(np.sum((np.asarray(estimate) - truth.to_vector()) ** 2))


def lasso_soft_threshold(y, lam: float | None = None) -> np.ndarray:
    """sign(y) max(|y| - lam, 0); ``lam`` defaults to sqrt(2 log n)."""
    y = np.asarray(y, dtype=float)
    if lam is None:
        lam = math.sqrt(2 * math.log(max(y.size, 2)))
    if not lam > 0:
        raise InvalidParameterError("lam must be positive")
    return np.sign(y) * np.maximum(np.abs(y) - lam, 0.0)


def method_label(spec: PriorSpec) -> str:
    if isinstance(spec, DirichletLaplace):
        return spec.label
    if isinstance(spec, GlobalLocal):
        return "BL"
    if isinstance(spec, Horseshoe):
        return "HS"
    return type(spec).__name__


def _stepper(spec: PriorSpec, n: int):
    if isinstance(spec, DirichletLaplace):
        check_dl_tau_prior(spec, n)
        a = spec.resolve_a(n)
        return lambda s, y, rng: dl_gibbs_step(s, y, a, rng)
    if isinstance(spec, GlobalLocal):
        return lambda s, y, rng: bl_gibbs_step(s, y, rng, spec)
    if isinstance(spec, Horseshoe):
        return lambda s, y, rng: hs_gibbs_step(s, y, rng, spec)
    raise InvalidParameterError(f"run_chain does not sample {type(spec).__name__}")


def _effective_size(x: np.ndarray) -> float:
    # initial-positive-sequence estimate on one scalar trace
    x = np.asarray(x, dtype=float) - np.mean(x)
    m = x.size
    var = float(np.dot(x, x) / m)
    if m < 4 or var == 0:
        return float(m)
    f = np.fft.rfft(x, 2 * m)
    acf = np.fft.irfft(f * np.conj(f))[:m] / (m * var)
    s = 0.0
    for k in range(1, m - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair <= 0:
            break
        s += pair
    return float(m / (1 + 2 * s))


def run_chain(spec: PriorSpec, y, cfg: McmcConfig, truth: SparseTruth | None = None,
              rng: RngStream | None = None, keep_draws: bool = False) -> FitSummary:
    """Burn-in, keep every ``thin``-th sweep, summarize by coordinatewise medians."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise InvalidParameterError("y must be a non-empty finite vector")
    if truth is not None and truth.n != y.size:
        raise InvalidParameterError("truth and y differ in length")
    step = _stepper(spec, y.size)
    rng = cfg.rng() if rng is None else rng
    state = dl_initial_state(y) if isinstance(spec, DirichletLaplace) else ChainState.initial(y)
    draws = np.empty((cfg.n_kept, y.size))
    taus = np.empty(cfg.n_kept)
    i = 0
    for it in range(cfg.n_iter):
        state = step(state, y, rng)
        if it >= cfg.n_burnin and (it - cfg.n_burnin) % cfg.thin == 0:
            draws[i] = state.theta
            taus[i] = state.tau
            i += 1
    med = np.median(draws, axis=0)
    diag = {"ess_log_tau": _effective_size(np.log(taus)), "final_tau": float(state.tau)}
    if keep_draws:
        diag["draws"] = draws
        diag["tau_draws"] = taus
    return FitSummary(med, squared_error(med, truth), cfg.n_kept, method_label(spec), diag)


def pm_exact_posterior(y, kappa: float = 0.1, rng: RngStream | None = None,
                       truth: SparseTruth | None = None, n_draws: int = 0) -> FitSummary:
    """Point-mass mixture fit; optional exact subset draws go into diagnostics."""
    post = pm_posterior(y, kappa)
    med = post.median()
    diag = {"inclusion": post.inclusion, "size_posterior": post.size_posterior, "posterior": post}
    if n_draws:
        if rng is None:
            raise InvalidParameterError("subset draws need an rng")
        diag["subsets"] = post.sample_subsets(rng, n_draws)
    return FitSummary(med, squared_error(med, truth), n_draws, "PM", diag)
