"""Gibbs sampler for the Dirichlet-Laplace prior in the normal-means model.

Augmented model: theta_j ~ N(0, psi_j phi_j^2 tau^2), psi_j ~ Exp(1/2),
phi ~ Dir(a, ..., a), tau ~ gamma(n a, rate 1/2).

A sweep draws the block (phi, tau, psi) jointly given theta by composition,
phi | theta (tau and psi integrated out), then tau | phi, theta, then
psi | phi, tau, theta, and finally theta | psi, phi, tau, y.  Drawing phi
before tau is what makes the block exact; the reverse order would use a phi
conditional with tau integrated out after tau was already refreshed, which
does not leave the target invariant.  Starting the sweep with the block means
the initial theta (= y) is what the first phi draw sees; with a = 1/n a
theta-first start collapses every coordinate to about y / n and the chain
needs a very long time to recover.
"""

from __future__ import annotations

import numpy as np

from ..priors import DirichletLaplace, Gamma
from ..rngdist import (
    CHI_FLOOR,
    InvalidParameterError,
    RngStream,
    sample_gig_array,
    sample_reciprocal_inverse_gaussian_array,
)
from .state import ChainState, clamp_simplex


def check_dl_tau_prior(spec: DirichletLaplace, n: int) -> None:
    """The joint phi update needs the gamma(n a, 1/2) global prior."""
    tp = spec.tau_prior
    if tp is None:
        return
    a = spec.resolve_a(n)
    if not (isinstance(tp, Gamma) and np.isclose(tp.shape, n * a) and np.isclose(tp.rate, 0.5)):
        raise InvalidParameterError(
            "the DL sampler supports only the gamma(n a, rate 1/2) global prior"
        )


def sample_phi_posterior(theta, a: float, rng: RngStream) -> np.ndarray:
    """phi | theta: T_j ~ giG(a - 1, 1, 2|theta_j|) independently, phi = T / sum(T)."""
    theta = np.asarray(theta, dtype=float)
    if not 0 < a <= 1:
        raise InvalidParameterError(f"a must lie in (0, 1], got {a}")
    if theta.size == 1:
        return np.ones(1)
    chi = np.maximum(2.0 * np.abs(theta), CHI_FLOOR)
    t = sample_gig_array(a - 1.0, 1.0, chi, rng)
    return clamp_simplex(t)


def sample_tau_posterior(theta, phi, a: float, rng: RngStream) -> float:
    """tau | phi, theta ~ giG(n a - n, 1, 2 sum |theta_j| / phi_j)."""
    n = theta.size
    chi = 2.0 * float(np.sum(np.abs(theta) / phi))
    chi = min(max(chi, CHI_FLOOR), 1e300)
    return float(sample_gig_array(n * a - n, 1.0, chi, rng))


def sample_psi_posterior(theta, phi, tau: float, rng: RngStream) -> np.ndarray:
    """psi_j = 1 / zeta_j with zeta_j ~ iG(phi_j tau / |theta_j|, 1)."""
    inv_mu = np.abs(theta) / (phi * tau)
    return sample_reciprocal_inverse_gaussian_array(inv_mu, 1.0, rng)


def dl_theta_step(state: ChainState, y: np.ndarray, rng: RngStream) -> np.ndarray:
    """theta_j ~ N(v y_j, v), v = s^2 / (1 + s^2), s = sqrt(psi_j) phi_j tau.

    The standard deviation is formed as s / hypot(1, s) so that it does not
    underflow through s^2 when s is tiny.
    """
    s = np.sqrt(state.psi) * state.phi * state.tau
    sd = s / np.hypot(1.0, s)
    return sd * sd * y + sd * rng.normal(y.shape)


def dl_initial_state(y) -> ChainState:
    """theta = y with exact zeros replaced by 1.

    With a < 1 the local scale given theta_j collapses as theta_j -> 0, so a
    coordinate started at exactly 0 never leaves the floor of the giG draws.
    """
    state = ChainState.initial(y)
    state.theta[state.theta == 0.0] = 1.0
    return state


def dl_gibbs_step(state: ChainState, y, a: float, rng: RngStream) -> ChainState:
    """One full sweep; returns a new state."""
    y = np.asarray(y, dtype=float)
    if y.shape != state.theta.shape:
        raise InvalidParameterError("y and state have different lengths")
    theta = state.theta
    phi = sample_phi_posterior(theta, a, rng)
    tau = sample_tau_posterior(theta, phi, a, rng)
    psi = sample_psi_posterior(theta, phi, tau, rng)
    out = ChainState(theta, psi, phi, tau)
    out.theta = dl_theta_step(out, y, rng)
    out.check()
    return out
