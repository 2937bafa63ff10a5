"""Exact posterior for the point-mass mixture prior in the normal-means model.

Prior: support size s ~ pi_n(s), support S uniform given s, theta_j iid
standard Laplace on S and zero off S.  Given y the subset posterior is
    p(S | y) proportional to  pi_n(|S|) / C(n, |S|) * prod_{j in S} r_j,
with r_j the slab-to-null marginal likelihood ratio of y_j.  Everything below
is a log-space dynamic program over elementary symmetric polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtri_exp

from ..priors import complexity_prior_pmf
from ..rngdist import InvalidParameterError, RngStream

_LOG_HALF_SQRT_E = 0.5 - math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def log_slab_marginal(y):
    """log of m1(y) = int phi(y - u) exp(-|u|) / 2 du.

    m1(y) = exp(1/2) / 2 * [exp(-y) Phi(y - 1) + exp(y) Phi(-y - 1)].
    """
    y = np.asarray(y, dtype=float)
    return _LOG_HALF_SQRT_E + np.logaddexp(-y + log_ndtr(y - 1.0), y + log_ndtr(-y - 1.0))


def log_null_marginal(y):
    y = np.asarray(y, dtype=float)
    return -0.5 * y * y - _LOG_SQRT_2PI


def log_esp_table(log_r) -> np.ndarray:
    """Prefix table F[j, k] = log e_k(r_1, ..., r_j), j = 0..n, k = 0..n."""
    log_r = np.asarray(log_r, dtype=float)
    n = log_r.size
    F = np.full((n + 1, n + 1), -np.inf)
    F[0, 0] = 0.0
    for j in range(1, n + 1):
        F[j, 0] = 0.0
        F[j, 1 : j + 1] = np.logaddexp(F[j - 1, 1 : j + 1], F[j - 1, 0:j] + log_r[j - 1])
    return F


def log_elementary_symmetric(log_r) -> np.ndarray:
    """log e_k(r) for k = 0..n."""
    return log_esp_table(log_r)[-1]


def elementary_symmetric(r) -> np.ndarray:
    """e_k(r) for k = 0..n (linear scale; for small inputs)."""
    with np.errstate(divide="ignore"):
        return np.exp(log_elementary_symmetric(np.log(np.asarray(r, dtype=float))))


def _log_comb(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


@dataclass
class PmPosterior:
    y: np.ndarray
    kappa: float
    log_r: np.ndarray
    log_w: np.ndarray  # log pi_n(s) - log C(n, s)
    table: np.ndarray
    log_z: float
    size_posterior: np.ndarray
    inclusion: np.ndarray

    @property
    def n(self) -> int:
        return self.y.size

    def subset_log_prob(self, subset) -> float:
        idx = np.asarray(sorted(subset), dtype=int)
        return float(self.log_w[idx.size] + self.log_r[idx].sum() - self.log_z)

    def sample_subsets(self, rng: RngStream, m: int = 1) -> list[tuple[int, ...]]:
        """Exact draws of S: size from its posterior, then a backward pass."""
        out = []
        sizes = rng.generator.choice(self.n + 1, size=m, p=self.size_posterior)
        for s in sizes:
            k = int(s)
            chosen = []
            for j in range(self.n, 0, -1):
                if k == 0:
                    break
                if k == j:
                    chosen.extend(range(j - 1, -1, -1))
                    break
                lp = self.log_r[j - 1] + self.table[j - 1, k - 1] - self.table[j, k]
                if math.log(rng.uniform()) < lp:
                    chosen.append(j - 1)
                    k -= 1
            out.append(tuple(sorted(chosen)))
        return out

    def median(self) -> np.ndarray:
        return np.array([_mixture_median(yj, pj) for yj, pj in zip(self.y, self.inclusion)])


def _inclusion_probabilities(log_r, log_w, F, log_z):
    # backward messages G[j, k] = log sum_m w_{k+m} e_m(r_{j+1..n}), k = 0..n
    n = log_r.size
    G = np.full(n + 2, -np.inf)
    G[: n + 1] = log_w
    incl = np.empty(n)
    for j in range(n, 0, -1):
        # coordinate j included: k - 1 of the first j - 1 picked, then r_j, then G_j(k)
        k = np.arange(1, j + 1)
        incl[j - 1] = math.exp(
            min(0.0, float(np.logaddexp.reduce(F[j - 1, k - 1] + log_r[j - 1] + G[k])) - log_z)
        )
        # G_{j-1}(k) = G_j(k) + r_j G_j(k + 1)
        G[: n + 1] = np.logaddexp(G[: n + 1], log_r[j - 1] + G[1 : n + 2])
    return incl


def _slab_posterior_parts(y):
    # slab posterior given inclusion: mixture of N(y + 1, 1) on (-inf, 0) and
    # N(y - 1, 1) on (0, inf), with masses proportional to these log weights
    lm = y + log_ndtr(-y - 1.0)
    lp = -y + log_ndtr(y - 1.0)
    tot = np.logaddexp(lm, lp)
    return lm - tot, lp - tot


def _mixture_median(y: float, p: float) -> float:
    """Median of (1 - p) delta_0 + p * slab posterior."""
    log_wm, log_wp = _slab_posterior_parts(y)
    wm, wp = math.exp(log_wm), math.exp(log_wp)
    if p * wm > 0.5:
        # solve p * wm * Phi(m - y - 1) / Phi(-y - 1) = 1/2 for m < 0
        lt = math.log(0.5 / p) - log_wm + float(log_ndtr(-y - 1.0))
        return float(y + 1.0 + ndtri_exp(min(lt, 0.0)))
    if p * wp > 0.5:
        # upper tail: p * wp * Phi(y - 1 - m) / Phi(y - 1) = 1/2 for m > 0
        lt = math.log(0.5 / p) - log_wp + float(log_ndtr(y - 1.0))
        return float(y - 1.0 - ndtri_exp(min(lt, 0.0)))
    return 0.0


def pm_posterior(y, kappa: float) -> PmPosterior:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise InvalidParameterError("y must be a non-empty finite vector")
    n = y.size
    log_r = log_slab_marginal(y) - log_null_marginal(y)
    s = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        log_pi = np.log(complexity_prior_pmf(n, kappa))
    log_w = log_pi - _log_comb(n, s)
    F = log_esp_table(log_r)
    joint = log_w + F[n]
    log_z = float(np.logaddexp.reduce(joint))
    size_post = np.exp(joint - log_z)
    size_post /= size_post.sum()
    incl = _inclusion_probabilities(log_r, log_w, F, log_z)
    return PmPosterior(y, kappa, log_r, log_w, F, log_z, size_post, incl)
