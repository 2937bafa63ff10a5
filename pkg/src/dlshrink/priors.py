"""Prior families on theta in R^n and forward simulation from them.

Conventions (one fixed mapping, used everywhere in the package):

* ``tau`` is always the *global* parameter and ``TauPrior`` its prior.
* Global-local families are ``theta_j ~ N(0, psi_j * tau)``: ``tau`` is a
  variance there, and ``local_rate`` is the rate of the exponential prior on
  the local variances ``psi_j``.
* For the Dirichlet-Laplace family ``theta_j ~ DE(phi_j * tau)``: ``tau`` is a
  Laplace scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import gammaln

from .rngdist import InvalidParameterError, RngStream, sample_dirichlet

__all__ = [
    "Deterministic",
    "DirichletLaplace",
    "Exponential",
    "Gamma",
    "GlobalLocal",
    "GlobalOnly",
    "HalfCauchy",
    "Horseshoe",
    "IidNormal",
    "InverseGamma",
    "PointMassMixture",
    "PriorSpec",
    "SparseTruth",
    "TauPrior",
    "bayesian_lasso",
    "complexity_prior_pmf",
    "sample_tau",
    "sample_theta_prior",
    "tau_log_density",
]


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")


# ---------------------------------------------------------------------------
# priors on the global parameter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InverseGamma:
    alpha: float
    beta: float

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)


@dataclass(frozen=True)
class HalfCauchy:
    """Half-Cauchy(0, scale) on ``tau`` itself, or on ``sqrt(tau)`` when ``on_sqrt``.

    The density on ``tau`` is bounded and bounded away from zero on (0, 1)
    only for ``on_sqrt=False``.  The samplers use ``on_sqrt=True``, where the
    inverse-gamma augmentation is conjugate.
    """

    scale: float = 1.0
    on_sqrt: bool = False

    def __post_init__(self):
        _positive("scale", self.scale)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _positive("rate", self.rate)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("rate", self.rate)


@dataclass(frozen=True)
class Deterministic:
    """Point mass at ``tau_n`` (a plug-in global parameter)."""

    tau_n: float

    def __post_init__(self):
        _positive("tau_n", self.tau_n)


TauPrior = Union[InverseGamma, HalfCauchy, Exponential, Gamma, Deterministic]


def sample_tau(prior: TauPrior, rng: RngStream, size=None):
    if isinstance(prior, InverseGamma):
        return prior.beta / rng.gamma(prior.alpha, size)
    if isinstance(prior, HalfCauchy):
        c = prior.scale * np.abs(rng.normal(size) / rng.normal(size))
        return c * c if prior.on_sqrt else c
    if isinstance(prior, Exponential):
        return rng.exponential(size) / prior.rate
    if isinstance(prior, Gamma):
        return rng.gamma(prior.shape, size) / prior.rate
    if isinstance(prior, Deterministic):
        return prior.tau_n if size is None else np.full(size, prior.tau_n)
    raise InvalidParameterError(f"unknown tau prior {prior!r}")


def tau_log_density(prior: TauPrior, tau):
    """Log density of the global parameter; not defined for ``Deterministic``."""
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore"):
        if isinstance(prior, InverseGamma):
            a, b = prior.alpha, prior.beta
            return a * math.log(b) - gammaln(a) - (a + 1) * np.log(tau) - b / tau
        if isinstance(prior, HalfCauchy):
            s = prior.scale
            if prior.on_sqrt:
                r = np.sqrt(tau)
                return math.log(2 / (math.pi * s)) - np.log1p((r / s) ** 2) - math.log(2.0) - np.log(r)
            return math.log(2 / (math.pi * s)) - np.log1p((tau / s) ** 2)
        if isinstance(prior, Exponential):
            return math.log(prior.rate) - prior.rate * tau
        if isinstance(prior, Gamma):
            k, r = prior.shape, prior.rate
            return k * math.log(r) - gammaln(k) + (k - 1) * np.log(tau) - r * tau
    raise InvalidParameterError(f"no density for tau prior {prior!r}")


# ---------------------------------------------------------------------------
# priors on theta
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IidNormal:
    variance: float = 1.0

    def __post_init__(self):
        _positive("variance", self.variance)


@dataclass(frozen=True)
class GlobalOnly:
    """theta_j ~ N(0, tau), i.e. local variances fixed at 1."""

    tau_prior: TauPrior


@dataclass(frozen=True)
class GlobalLocal:
    """theta_j ~ N(0, psi_j tau), psi_j ~ Exp(local_rate), tau ~ tau_prior."""

    tau_prior: TauPrior
    local_rate: float = 0.5

    def __post_init__(self):
        _positive("local_rate", self.local_rate)


@dataclass(frozen=True)
class DirichletLaplace:
    """theta_j ~ DE(phi_j tau), phi ~ Dir(a, ..., a).

    ``a`` is a number in (0, 1] or the string ``"1/n"``.  ``tau_prior=None``
    means the gamma(n a, rate 1/2) prior for which the joint phi update is exact.
    """

    a: float | str = "1/n"
    tau_prior: TauPrior | None = None

    def __post_init__(self):
        if isinstance(self.a, str):
            if self.a != "1/n":
                raise InvalidParameterError(f"a must be a number in (0, 1] or '1/n', got {self.a!r}")
        elif not (0 < self.a <= 1):
            raise InvalidParameterError(f"a must lie in (0, 1], got {self.a}")

    def resolve_a(self, n: int) -> float:
        return 1.0 / n if self.a == "1/n" else float(self.a)

    def resolve_tau_prior(self, n: int) -> TauPrior:
        if self.tau_prior is not None:
            return self.tau_prior
        return Gamma(n * self.resolve_a(n), 0.5)

    @property
    def label(self) -> str:
        return "DL_1/n" if self.a == "1/n" else f"DL_{self.a:g}"


@dataclass(frozen=True)
class PointMassMixture:
    """Complexity prior on the support size, uniform subset, standard Laplace slab."""

    kappa: float = 0.1

    def __post_init__(self):
        _positive("kappa", self.kappa)


@dataclass(frozen=True)
class Horseshoe:
    """theta_j ~ N(0, psi_j tau) with sqrt(psi_j) ~ C+(0, 1) and tau ~ tau_prior."""

    tau_prior: TauPrior = field(default_factory=lambda: HalfCauchy(on_sqrt=True))


PriorSpec = Union[IidNormal, GlobalOnly, GlobalLocal, DirichletLaplace, PointMassMixture, Horseshoe]


def bayesian_lasso() -> GlobalLocal:
    """Bayesian lasso: exponential(1/2) local variances, half-Cauchy global scale."""
    return GlobalLocal(HalfCauchy(on_sqrt=True), 0.5)


@dataclass(frozen=True)
class SparseTruth:
    """A q-sparse mean vector: ``values`` placed at ``support`` in R^n."""

    n: int
    support: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError("n must be >= 1")
        if len(self.support) != len(self.values):
            raise InvalidParameterError("support and values differ in length")
        if len(set(self.support)) != len(self.support) or len(self.support) > self.n:
            raise InvalidParameterError("support must hold distinct indices, at most n of them")
        if any(not (0 <= j < self.n) for j in self.support):
            raise InvalidParameterError("support index out of range")
        if any(v == 0 for v in self.values):
            raise InvalidParameterError("values on the support must be nonzero")

    @classmethod
    def from_vector(cls, theta) -> "SparseTruth":
        theta = np.asarray(theta, dtype=float)
        idx = np.flatnonzero(theta)
        return cls(theta.size, tuple(int(i) for i in idx), tuple(float(v) for v in theta[idx]))

    @classmethod
    def constant(cls, n: int, q: int, value: float) -> "SparseTruth":
        """First ``q`` coordinates equal to ``value``; ``value = 0`` gives the null truth."""
        if value == 0:
            return cls(n, (), ())
        return cls(n, tuple(range(q)), (float(value),) * q)

    @property
    def q(self) -> int:
        return len(self.support)

    def to_vector(self) -> np.ndarray:
        out = np.zeros(self.n)
        out[list(self.support)] = self.values
        return out


def complexity_prior_pmf(n: int, kappa: float) -> np.ndarray:
    """pi_n(s) proportional to exp(-kappa s log(2n/s)) on s = 0..n; s = 0 has weight 1."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    _positive("kappa", kappa)
    s = np.arange(n + 1, dtype=float)
    logw = np.zeros(n + 1)
    logw[1:] = -kappa * s[1:] * np.log(2.0 * n / s[1:])
    w = np.exp(logw - logw.max())
    return w / w.sum()


def sample_theta_prior(spec: PriorSpec, n: int, rng: RngStream, size=None) -> np.ndarray:
    """Joint draw(s) of theta from ``spec``; shape ``(n,)`` or ``(size, n)``."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    m = 1 if size is None else int(size)
    shape = (m, n)

    if isinstance(spec, IidNormal):
        theta = math.sqrt(spec.variance) * rng.normal(shape)
    elif isinstance(spec, GlobalOnly):
        tau = np.asarray(sample_tau(spec.tau_prior, rng, m), dtype=float)
        theta = np.sqrt(tau)[:, None] * rng.normal(shape)
    elif isinstance(spec, GlobalLocal):
        tau = np.asarray(sample_tau(spec.tau_prior, rng, m), dtype=float)
        psi = rng.exponential(shape) / spec.local_rate
        theta = np.sqrt(psi * tau[:, None]) * rng.normal(shape)
    elif isinstance(spec, Horseshoe):
        tau = np.asarray(sample_tau(spec.tau_prior, rng, m), dtype=float)
        lam = rng.normal(shape) / rng.normal(shape)
        theta = np.abs(lam) * np.sqrt(tau)[:, None] * rng.normal(shape)
    elif isinstance(spec, DirichletLaplace):
        a = spec.resolve_a(n)
        tau = np.asarray(sample_tau(spec.resolve_tau_prior(n), rng, m), dtype=float)
        phi = sample_dirichlet(np.full(n, a), rng, size=m)
        lap = rng.exponential(shape) * np.where(rng.uniform(shape) < 0.5, -1.0, 1.0)
        theta = phi * tau[:, None] * lap
    elif isinstance(spec, PointMassMixture):
        pmf = complexity_prior_pmf(n, spec.kappa)
        s = rng.generator.choice(n + 1, size=m, p=pmf)
        # uniform subset of size s: the s smallest of n uniform keys
        ranks = np.argsort(np.argsort(rng.uniform(shape), axis=1), axis=1)
        lap = rng.exponential(shape) * np.where(rng.uniform(shape) < 0.5, -1.0, 1.0)
        theta = np.where(ranks < s[:, None], lap, 0.0)
    else:
        raise InvalidParameterError(f"unknown prior spec {spec!r}")

    return theta[0] if size is None else theta
