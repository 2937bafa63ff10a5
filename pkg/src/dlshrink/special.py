"""Log-space incomplete gamma and (non)central chi-square CDFs.

scipy's regularized incomplete gamma is used wherever its result is
comfortably above the underflow range; below that the power series is
summed in log space so probabilities like 1e-400 keep full relative accuracy.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammainc, gammaincc, gammaln, logsumexp

_SAFE = 1e-250


def _log_lower_series(a, x):
    # log P(a, x) = a log x - x - lgamma(a+1) + log sum_k x^k / ((a+1)...(a+k))
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    term = np.ones(np.broadcast(a, x).shape)
    total = term.copy()
    k = 0
    active = np.ones(term.shape, dtype=bool)
    while active.any() and k < 100000:
        k += 1
        term = np.where(active, term * x / (a + k), term)
        total = np.where(active, total + term, total)
        active = term > 1e-17 * total
    with np.errstate(divide="ignore"):
        return a * np.log(x) - x - gammaln(a + 1.0) + np.log(total)


def _log_upper_cf(a, x):
    # log Q(a, x) via Lentz continued fraction (valid for x > a + 1)
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full(b.shape, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 100000):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return -x + a * np.log(x) - gammaln(a) + np.log(h)


def log_gammainc(a, x):
    """log of the regularized lower incomplete gamma P(a, x)."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(a.shape)
    zero = x <= 0
    out[zero] = -np.inf
    p = gammainc(a, x)
    ok = (~zero) & (p > _SAFE)
    with np.errstate(divide="ignore"):
        out[ok] = np.log(p[ok])
    rest = ~(zero | ok)
    if rest.any():
        out[rest] = _log_lower_series(a[rest], x[rest])
    return out if out.ndim else float(out)


def log_gammaincc(a, x):
    """log of the regularized upper incomplete gamma Q(a, x)."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(a.shape)
    zero = x <= 0
    out[zero] = 0.0
    q = gammaincc(a, x)
    ok = (~zero) & (q > _SAFE)
    out[ok] = np.log(q[ok])
    rest = ~(zero | ok)
    if rest.any():
        # Q tiny only when x well above a, where the fraction converges
        out[rest] = _log_upper_cf(a[rest], x[rest])
    return out if out.ndim else float(out)


def chi2_logcdf(x, df):
    """log P(chi^2_df <= x)."""
    return log_gammainc(0.5 * np.asarray(df, dtype=float), 0.5 * np.asarray(x, dtype=float))


def ncx2_logcdf(x: float, df: float, nc: float) -> float:
    """log P(chi'^2_df(nc) <= x) as a Poisson(nc/2) mixture of central CDFs.

    The summand is a product of two log-concave sequences in k, so it is
    unimodal; the sum is taken over a window around its peak.
    """
    if x <= 0:
        return -np.inf
    if nc <= 0:
        return float(chi2_logcdf(x, df))
    mu = 0.5 * nc
    half = 0.5 * df

    def term(k):
        k = np.asarray(k, dtype=float)
        return k * np.log(mu) - mu - gammaln(k + 1.0) + log_gammainc(half + k, 0.5 * x)

    kmax = mu + 12.0 * np.sqrt(mu) + 60.0
    peak = minimize_scalar(lambda k: -float(term(k)), bounds=(0.0, kmax), method="bounded",
                           options={"xatol": 0.5})
    width = 12.0 * np.sqrt(mu) + 60.0
    lo = max(0, int(peak.x - width))
    hi = int(peak.x + width) + 1
    k = np.arange(lo, hi + 1, dtype=float)
    return float(logsumexp(term(k)))
