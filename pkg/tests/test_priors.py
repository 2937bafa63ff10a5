from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from dlshrink.priors import (
    Deterministic,
    DirichletLaplace,
    Exponential,
    Gamma,
    GlobalLocal,
    GlobalOnly,
    HalfCauchy,
    Horseshoe,
    IidNormal,
    InverseGamma,
    PointMassMixture,
    SparseTruth,
    bayesian_lasso,
    complexity_prior_pmf,
    sample_tau,
    sample_theta_prior,
    tau_log_density,
)
from dlshrink.rngdist import InvalidParameterError, RngStream


def test_iid_normal_norm_is_chi_square():
    th = sample_theta_prior(IidNormal(1.0), 10, RngStream(1), size=10_000)
    assert stats.kstest((th ** 2).sum(axis=1), stats.chi2(10).cdf).pvalue > 0.01


def test_dl_marginal_is_wrapped_gamma():
    spec = DirichletLaplace("1/n", Deterministic(1.0))
    th = sample_theta_prior(spec, 10, RngStream(2), size=10_000)
    assert stats.kstest(np.abs(th[:, 0]), stats.gamma(0.1).cdf).pvalue > 0.01


def test_point_mass_support_size_expectation():
    n, kappa = 20, 0.1
    pmf = complexity_prior_pmf(n, kappa)
    expected = float(np.dot(np.arange(n + 1), pmf))
    th = sample_theta_prior(PointMassMixture(kappa), n, RngStream(3), size=20_000)
    sizes = (th != 0).sum(axis=1)
    se = sizes.std(ddof=1) / math.sqrt(sizes.size)
    assert abs(sizes.mean() - expected) < 3 * se


def test_complexity_prior_pmf_cases():
    p = complexity_prior_pmf(1, 1e-12)
    assert np.allclose(p, [0.5, 0.5], atol=1e-10)
    p = complexity_prior_pmf(20, 0.1)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p[5] / p[0] == pytest.approx(math.exp(-0.5 * math.log(8.0)), rel=1e-12)


def test_global_local_with_fixed_tau_is_laplace():
    # N(0, psi tau) with psi ~ Exp(rate 1/2) is DE(sqrt(tau))
    tau = 2.5
    th = sample_theta_prior(GlobalLocal(Deterministic(tau), 0.5), 1, RngStream(4), size=10_000)[:, 0]
    assert stats.kstest(th, stats.laplace(scale=math.sqrt(tau)).cdf).pvalue > 0.01


def test_horseshoe_local_scale_is_half_cauchy():
    th = sample_theta_prior(Horseshoe(Deterministic(1.0)), 1, RngStream(5), size=20_000)[:, 0]
    # theta / |lambda| is N(0,1), so P(|theta| < 1) has a closed form by quadrature
    p = integrate.quad(lambda l: 2 / (math.pi * (1 + l * l)) * (2 * stats.norm.cdf(1 / l) - 1), 0, np.inf)[0]
    frac = np.mean(np.abs(th) < 1)
    assert abs(frac - p) < 3 * math.sqrt(p * (1 - p) / th.size)


@pytest.mark.parametrize("prior", [InverseGamma(2.0, 3.0), HalfCauchy(1.5), HalfCauchy(0.7, on_sqrt=True),
                                   Exponential(2.0), Gamma(0.5, 0.5)])
def test_tau_density_integrates_to_one_and_matches_sampler(prior):
    total = integrate.quad(lambda u: math.exp(float(tau_log_density(prior, math.exp(u))) + u), -60, 60,
                           limit=400)[0]
    assert total == pytest.approx(1.0, abs=1e-7)
    draws = np.asarray(sample_tau(prior, RngStream(6), 5000))
    cdf = np.vectorize(lambda x: integrate.quad(
        lambda u: math.exp(float(tau_log_density(prior, math.exp(u))) + u), -60, math.log(x), limit=400)[0])
    grid = np.quantile(draws, np.linspace(0.01, 0.99, 41))
    assert stats.kstest(draws, lambda v: np.interp(v, grid, cdf(grid), left=0, right=1)).pvalue > 0.01


def test_dl_defaults():
    spec = DirichletLaplace()
    assert spec.resolve_a(50) == pytest.approx(0.02)
    assert spec.resolve_tau_prior(50) == Gamma(1.0, 0.5)
    assert spec.label == "DL_1/n"
    assert DirichletLaplace(0.5).label == "DL_0.5"


@pytest.mark.parametrize("bad", [lambda: DirichletLaplace(1.5), lambda: DirichletLaplace(0.0),
                                 lambda: InverseGamma(-1, 1), lambda: PointMassMixture(0.0),
                                 lambda: GlobalLocal(Exponential(1.0), -1.0), lambda: HalfCauchy(0.0)])
def test_invalid_hyperparameters(bad):
    with pytest.raises(InvalidParameterError):
        bad()


def test_sparse_truth_roundtrip():
    v = np.zeros(8)
    v[[1, 5]] = [3.0, -2.0]
    t = SparseTruth.from_vector(v)
    assert t.q == 2 and np.array_equal(t.to_vector(), v)
    c = SparseTruth.constant(10, 3, 7.0)
    assert c.q == 3 and c.to_vector()[:3].tolist() == [7.0] * 3
    with pytest.raises(InvalidParameterError):
        SparseTruth(3, (5,), (1.0,))


@pytest.mark.parametrize("spec", [IidNormal(), GlobalOnly(InverseGamma(1, 1)), bayesian_lasso(), Horseshoe(),
                                  DirichletLaplace(), PointMassMixture()])
def test_sample_shapes_and_determinism(spec):
    a = sample_theta_prior(spec, 7, RngStream(9), size=4)
    b = sample_theta_prior(spec, 7, RngStream(9), size=4)
    assert a.shape == (4, 7) and np.array_equal(a, b)
    assert sample_theta_prior(spec, 7, RngStream(9)).shape == (7,)
    assert np.all(np.isfinite(a))
