"""Gibbs samplers for Gaussian scale mixtures: Bayesian lasso and horseshoe.

Both use theta_j ~ N(0, psi_j tau).  A half-Cauchy on a standard deviation
is handled by the inverse-gamma auxiliary representation
    sqrt(v) ~ C+(0, s)  <=>  v | x ~ IG(1/2, 1/x),  x ~ IG(1/2, 1/s^2),
which makes every conditional conjugate.
"""

from __future__ import annotations

import math

import numpy as np

from ..priors import (
    Deterministic,
    Exponential,
    Gamma,
    GlobalLocal,
    HalfCauchy,
    Horseshoe,
    InverseGamma,
    TauPrior,
    tau_log_density,
)
from ..rngdist import (
    CHI_FLOOR,
    InvalidParameterError,
    RngStream,
    sample_gig_array,
    sample_reciprocal_inverse_gaussian_array,
)
from .state import ChainState, normal_means_theta


def _inv_gamma(shape, scale, rng: RngStream):
    return scale / rng.gamma(shape, np.shape(scale) or None)


def _slice_log_tau(logpost, tau: float, rng: RngStream, width: float = 1.0, max_steps: int = 50) -> float:
    """One stepping-out slice update on u = log tau (Jacobian included by caller)."""
    u0 = math.log(tau)
    level = logpost(u0) + math.log(rng.uniform())
    left = u0 - width * rng.uniform()
    right = left + width
    for _ in range(max_steps):
        if logpost(left) <= level:
            break
        left -= width
    for _ in range(max_steps):
        if logpost(right) <= level:
            break
        right += width
    while True:
        u = left + (right - left) * rng.uniform()
        if logpost(u) > level:
            return math.exp(u)
        if u < u0:
            left = u
        else:
            right = u


def update_global(prior: TauPrior, theta, psi, state: ChainState, rng: RngStream) -> tuple[float, float | None]:
    """Draw tau | theta, psi (and the auxiliary, if any) for theta_j ~ N(0, psi_j tau)."""
    n = theta.size
    ss = float(np.sum(theta * theta / psi))
    if isinstance(prior, Deterministic):
        return prior.tau_n, None
    if isinstance(prior, InverseGamma):
        return float(_inv_gamma(prior.alpha + n / 2, prior.beta + ss / 2, rng)), None
    if isinstance(prior, Exponential):
        return float(sample_gig_array(1 - n / 2, 2 * prior.rate, max(ss, CHI_FLOOR), rng)), None
    if isinstance(prior, Gamma):
        return float(sample_gig_array(prior.shape - n / 2, 2 * prior.rate, max(ss, CHI_FLOOR), rng)), None
    if isinstance(prior, HalfCauchy):
        if prior.on_sqrt:
            xi = state.xi if state.xi is not None else 1.0
            tau = float(_inv_gamma((n + 1) / 2, 1 / xi + ss / 2, rng))
            xi = float(_inv_gamma(1.0, 1 / prior.scale ** 2 + 1 / tau, rng))
            return tau, xi

        def logpost(u):
            tau = math.exp(u)
            return float(tau_log_density(prior, tau)) + u - 0.5 * n * u - ss / (2 * tau)

        return _slice_log_tau(logpost, state.tau, rng), None
    raise InvalidParameterError(f"unsupported global prior {prior!r}")


def bl_gibbs_step(state: ChainState, y, rng: RngStream, spec: GlobalLocal | None = None) -> ChainState:
    """One sweep: psi | theta, tau;  tau (and auxiliary) | theta, psi;  theta | psi, tau."""
    if spec is None:
        spec = GlobalLocal(HalfCauchy(on_sqrt=True), 0.5)
    y = np.asarray(y, dtype=float)
    lam = spec.local_rate
    theta = state.theta
    # psi_j | theta_j, tau ~ giG(1/2, 2 lam, theta_j^2 / tau), drawn as 1 / iG
    inv_mu = np.abs(theta) / math.sqrt(2 * lam * state.tau)
    psi = sample_reciprocal_inverse_gaussian_array(inv_mu, 2 * lam, rng)
    tau, xi = update_global(spec.tau_prior, theta, psi, state, rng)
    out = ChainState(normal_means_theta(y, psi * tau, rng), psi, state.phi, tau, None, xi)
    out.check()
    return out


def hs_gibbs_step(state: ChainState, y, rng: RngStream, spec: Horseshoe | None = None) -> ChainState:
    """One sweep with half-Cauchy locals sqrt(psi_j) ~ C+(0, 1) via auxiliaries nu_j."""
    if spec is None:
        spec = Horseshoe()
    y = np.asarray(y, dtype=float)
    nu = state.nu if state.nu is not None else np.ones(y.size)
    theta = state.theta
    psi = _inv_gamma(1.0, 1.0 / nu + theta * theta / (2 * state.tau), rng)
    psi = np.maximum(psi, CHI_FLOOR)
    nu = _inv_gamma(1.0, 1.0 + 1.0 / psi, rng)
    tau, xi = update_global(spec.tau_prior, theta, psi, state, rng)
    out = ChainState(normal_means_theta(y, psi * tau, rng), psi, state.phi, tau, nu, xi)
    out.check()
    return out
