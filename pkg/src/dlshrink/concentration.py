"""Prior small-ball probabilities P(||theta - theta0||_2 < t).

Two routes are provided and kept independent of each other:

* Monte Carlo hit counting under any :data:`PriorSpec`, with a Wilson interval
  reported on the log scale.
* Exact evaluation for Gaussian priors with a single global variance, by a
  one-dimensional log-space quadrature over tau of (non)central chi-square CDFs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import norm

from .priors import (
    Deterministic,
    Exponential,
    Gamma,
    GlobalOnly,
    HalfCauchy,
    IidNormal,
    InverseGamma,
    PriorSpec,
    SparseTruth,
    TauPrior,
    sample_theta_prior,
    tau_log_density,
)
from .rngdist import InvalidParameterError, RngStream
from .special import chi2_logcdf, ncx2_logcdf

__all__ = [
    "ConcentrationEstimate",
    "ConcentrationQuery",
    "UnsupportedPriorError",
    "concentration_exact",
    "concentration_global_quadrature",
    "concentration_mc",
    "concentration_mc_radii",
    "inverse_gamma_t_integral",
    "posterior_lb_ratio",
    "wilson_log_interval",
]

MONTE_CARLO = "monte_carlo"
QUADRATURE = "quadrature"
CHI_SQUARE_EXACT = "chi_square_exact"

_CHUNK = 50_000


class UnsupportedPriorError(InvalidParameterError):
    """The requested estimator cannot handle this prior."""


@dataclass(frozen=True)
class ConcentrationQuery:
    spec: PriorSpec
    theta0: SparseTruth
    t: float

    def __post_init__(self):
        if not (self.t > 0):
            raise InvalidParameterError(f"radius must be positive, got {self.t}")

    @property
    def n(self) -> int:
        return self.theta0.n


@dataclass(frozen=True)
class ConcentrationEstimate:
    """A log-probability with log-scale interval.

    Zero-hit Monte Carlo runs carry ``log_prob = -inf`` and the interval's
    upper end as the only informative number (flag ``zero_hits``).
    """

    log_prob: float
    ci_low: float
    ci_high: float
    method: str
    n_samples: int = 0
    flags: tuple[str, ...] = ()
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.log_prob > 1e-12:
            raise InvalidParameterError(f"log probability must be <= 0, got {self.log_prob}")
        if not (self.ci_low <= self.log_prob <= self.ci_high):
            raise InvalidParameterError(
                f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.log_prob}"
            )

    @property
    def prob(self) -> float:
        return math.exp(self.log_prob)

    def to_dict(self) -> dict:
        return {
            "log_prob": self.log_prob,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "method": self.method,
            "n_samples": self.n_samples,
            "flags": list(self.flags),
            **({"details": self.details} if self.details else {}),
        }


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def wilson_log_interval(hits: int, total: int, confidence: float = 0.99) -> tuple[float, float]:
    z = norm.ppf(0.5 + confidence / 2)
    p = hits / total
    denom = 1 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo, hi = max(centre - half, 0.0), min(centre + half, 1.0)
    with np.errstate(divide="ignore"):
        return float(np.log(lo)), float(np.log(hi))


def _chunk_hits(spec, theta0, radii_sq, seed, stream_id, size):
    rng = RngStream(seed, stream_id)
    theta = sample_theta_prior(spec, theta0.size, rng, size=size)
    d2 = np.sum((theta - theta0) ** 2, axis=1)
    return [int(np.count_nonzero(d2 < r2)) for r2 in radii_sq]


def _mc_hits(spec, theta0_vec, radii, n_samples, rng: RngStream, workers: int):
    radii_sq = [float(r) ** 2 for r in radii]
    sizes = [_CHUNK] * (n_samples // _CHUNK)
    if n_samples % _CHUNK:
        sizes.append(n_samples % _CHUNK)
    # chunk i always uses the same child stream, so totals do not depend on workers
    jobs = [(spec, theta0_vec, radii_sq, rng.seed, rng.spawn(f"mc-chunk-{i}").stream_id, s)
            for i, s in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk_hits, *zip(*jobs)))
    else:
        parts = [_chunk_hits(*j) for j in jobs]
    return np.sum(parts, axis=0)


def _mc_estimate(hits: int, total: int, confidence: float) -> ConcentrationEstimate:
    lo, hi = wilson_log_interval(hits, total, confidence)
    if hits == 0:
        return ConcentrationEstimate(-math.inf, -math.inf, hi, MONTE_CARLO, total, ("zero_hits",),
                                     {"hits": 0, "confidence": confidence})
    lp = math.log(hits / total)
    return ConcentrationEstimate(lp, min(lo, lp), max(hi, lp), MONTE_CARLO, total, (),
                                 {"hits": int(hits), "confidence": confidence})


def concentration_mc_radii(q: ConcentrationQuery, radii, n_samples: int, rng: RngStream,
                           confidence: float = 0.99, workers: int = 1) -> list[ConcentrationEstimate]:
    """Monte Carlo estimates for several radii from one set of prior draws."""
    if n_samples < 1000:
        raise InvalidParameterError("n_samples must be >= 1000")
    hits = _mc_hits(q.spec, q.theta0.to_vector(), radii, n_samples, rng, workers)
    return [_mc_estimate(int(h), n_samples, confidence) for h in hits]


def concentration_mc(q: ConcentrationQuery, n_samples: int, rng: RngStream,
                     confidence: float = 0.99, workers: int = 1) -> ConcentrationEstimate:
    """Hit-fraction estimate of P(||theta - theta0|| < t) under the prior."""
    return concentration_mc_radii(q, [q.t], n_samples, rng, confidence, workers)[0]


# ---------------------------------------------------------------------------
# quadrature over the global variance
# ---------------------------------------------------------------------------


def _log_integrate(g, lo=-60.0, hi=60.0, step=0.25, drop=45.0):
    """log of the integral over u in R of exp(g(u)), g vectorised or scalar."""
    grid = np.arange(lo, hi + step, step)
    vals = np.array([g(u) for u in grid])
    # widen the window until the edges are negligible
    for _ in range(8):
        peak = np.max(vals)
        if not np.isfinite(peak):
            return -math.inf
        grow_lo = vals[0] > peak - drop
        grow_hi = vals[-1] > peak - drop
        if not (grow_lo or grow_hi):
            break
        if grow_lo:
            ext = np.arange(grid[0] - 60.0, grid[0], step)
            grid = np.concatenate([ext, grid])
            vals = np.concatenate([[g(u) for u in ext], vals])
        if grow_hi:
            ext = np.arange(grid[-1] + step, grid[-1] + 60.0 + step, step)
            grid = np.concatenate([grid, ext])
            vals = np.concatenate([vals, [g(u) for u in ext]])
    peak = float(np.max(vals))
    keep = np.flatnonzero(vals > peak - drop)
    a = grid[max(keep[0] - 1, 0)]
    b = grid[min(keep[-1] + 1, grid.size - 1)]
    upeak = float(grid[np.argmax(vals)])

    def f(u):
        d = g(u) - peak
        return math.exp(d) if d > -745 else 0.0

    pts = [upeak] if a < upeak < b else None
    val, _ = integrate.quad(f, a, b, points=pts, epsabs=0.0, epsrel=1e-11, limit=400)
    return peak + math.log(val) if val > 0 else -math.inf


def _check_quadrature_prior(tau_prior):
    if not isinstance(tau_prior, (InverseGamma, Exponential, HalfCauchy, Gamma)):
        raise UnsupportedPriorError(
            f"quadrature needs a continuous global prior, got {type(tau_prior).__name__}"
        )


def _log_tau_integral(tau_prior: TauPrior, conditional_logp) -> float:
    def g(u):
        tau = math.exp(u)
        return float(tau_log_density(tau_prior, tau)) + u + conditional_logp(tau)

    return _log_integrate(g)


def _shifted_ball_logp(tau, n, s, t):
    """log P(||theta - theta0|| < t) for theta ~ N(0, tau I), ||theta0|| = s."""
    nc = s * s / tau
    if nc <= 2e6:
        return ncx2_logcdf(t * t / tau, n, nc)
    # tau is tiny next to the shift: the ball event is decided by the sign of
    # s - t up to Gaussian tails, so use the one-dimensional tail bounds
    if s > t:
        return math.log(2.0) + float(norm.logsf((s - t) / math.sqrt(tau)))
    if s < t:
        return float(chi2_logcdf((t - s) ** 2 / tau, n))
    return math.log(0.5)


def concentration_global_quadrature(tau_prior: TauPrior, n: int, theta0_norm: float,
                                    t: float) -> ConcentrationEstimate:
    """P(||theta - theta0|| < t) for theta | tau ~ N(0, tau I), tau ~ ``tau_prior``.

    Centered queries return the exact value.  For ``theta0_norm > 0`` the
    point value is the exact non-central probability, and ``ci_low``/``ci_high``
    hold the Gaussian shift bounds integrated over tau: the shifted half-radius
    lower bound and the centered upper bound.
    """
    _check_quadrature_prior(tau_prior)
    if n < 1 or not t > 0 or theta0_norm < 0:
        raise InvalidParameterError("need n >= 1, t > 0 and theta0_norm >= 0")
    t2 = float(t) ** 2
    centered = _log_tau_integral(tau_prior, lambda tau: float(chi2_logcdf(t2 / tau, n)))
    if theta0_norm == 0:
        return ConcentrationEstimate(centered, centered, centered, QUADRATURE, 0, ("exact",))

    s2 = float(theta0_norm) ** 2
    exact = _log_tau_integral(tau_prior, lambda tau: _shifted_ball_logp(tau, n, theta0_norm, t))
    lower = _log_tau_integral(
        tau_prior, lambda tau: -s2 / (2 * tau) + float(chi2_logcdf(t2 / (4 * tau), n)))
    return ConcentrationEstimate(exact, min(lower, exact), max(centered, exact), QUADRATURE, 0,
                                 ("exact", "bounds_anderson"),
                                 {"anderson_lower": lower, "centered_upper": centered})


def inverse_gamma_t_integral(alpha: float, beta: float, n: int, t: float) -> float:
    """Centered log P under an IG(alpha, beta) global prior via the simplex reduction.

    Integrating theta_j^2 over the simplex leaves a 1-d integral over s in (0, 1):
    P = w^{n/2} Gamma(n/2 + alpha) / (Gamma(alpha) Gamma(n/2)) beta^alpha
        * int_0^1 s^{n/2 - 1} (beta + w s / 2)^{-(n/2 + alpha)} ds / 2^{n/2},
    with w = t^2.  Independent of the tau-quadrature route.
    """
    w = float(t) ** 2
    h = n / 2

    def logf(s):
        return (h - 1) * math.log(s) - (h + alpha) * math.log(beta + w * s / 2)

    smax = min(1.0, max(1e-300, (h - 1) * 2 * beta / (w * (alpha + 1)))) if h > 1 else 1e-300
    peak = max(logf(smax), logf(1.0))
    val, _ = integrate.quad(lambda s: math.exp(logf(s) - peak) if s > 0 else 0.0, 0.0, 1.0,
                            points=[smax] if 0 < smax < 1 else None, epsabs=0.0, epsrel=1e-12,
                            limit=400)
    return (peak + math.log(val) + h * math.log(w) - h * math.log(2.0) + alpha * math.log(beta)
            + gammaln(h + alpha) - gammaln(alpha) - gammaln(h))


def _gaussian_exact(var: float, n: int, theta0_norm: float, t: float) -> ConcentrationEstimate:
    lp = ncx2_logcdf(t * t / var, n, theta0_norm ** 2 / var)
    return ConcentrationEstimate(lp, lp, lp, CHI_SQUARE_EXACT, 0, ("exact",))


def concentration_exact(q: ConcentrationQuery) -> ConcentrationEstimate:
    """Exact route when one exists: IidNormal and GlobalOnly priors."""
    norm0 = float(np.linalg.norm(q.theta0.to_vector()))
    spec = q.spec
    if isinstance(spec, IidNormal):
        return _gaussian_exact(spec.variance, q.n, norm0, q.t)
    if isinstance(spec, GlobalOnly):
        if isinstance(spec.tau_prior, Deterministic):
            return _gaussian_exact(spec.tau_prior.tau_n, q.n, norm0, q.t)
        return concentration_global_quadrature(spec.tau_prior, q.n, norm0, q.t)
    raise UnsupportedPriorError(f"no exact route for {type(spec).__name__}")


def posterior_lb_ratio(q: ConcentrationQuery, t: float, r: float, estimator: str = "exact",
                       n_samples: int = 1_000_000, rng: RngStream | None = None) -> float:
    """log P(<t) - log P(<r) + r^2.

    Strongly negative values mean the prior puts too little mass near theta0
    at radius t relative to radius r for the posterior to contract at rate t.
    ``estimator`` is ``"exact"`` (chi-square or quadrature) or ``"monte_carlo"``;
    a zero-hit Monte Carlo term raises, since the ratio is then undefined.
    """
    if not r > t > 0:
        raise InvalidParameterError("need r > t > 0")
    if estimator == MONTE_CARLO:
        if rng is None:
            raise InvalidParameterError("monte_carlo estimator needs an rng")
        est_t, est_r = concentration_mc_radii(q, [t, r], n_samples, rng)
        for e in (est_t, est_r):
            if "zero_hits" in e.flags:
                raise InvalidParameterError("zero Monte Carlo hits; the ratio is undefined")
    elif estimator in ("exact", QUADRATURE, CHI_SQUARE_EXACT):
        est_t = concentration_exact(ConcentrationQuery(q.spec, q.theta0, t))
        est_r = concentration_exact(ConcentrationQuery(q.spec, q.theta0, r))
    else:
        raise InvalidParameterError(f"unknown estimator {estimator!r}")
    return est_t.log_prob - est_r.log_prob + r * r

