import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from powercal.errors import UnsupportedPairError
from powercal.models import Dataset, GammaPrior, NormalKnownVar, NormalPrior, Poisson, poisson_natural
from powercal.posterior import (
    DensityGrid,
    density_distance,
    power_posterior_conjugate,
    power_posterior_grid,
    tabulate,
)

L1_N01_N04 = 0.64534913766953732950440970259  # mpmath, sd 1 vs sd 2


class TestConjugate:
    def test_normal_example(self):
        data = Dataset(np.full(50, 0.2))  # n = 50, sum = 10
        post = power_posterior_conjugate(NormalKnownVar(1.0), NormalPrior(0.0, 0.01), data, 0.5)
        assert post.precision == pytest.approx(25.01)
        assert post.loc == pytest.approx(5 / 25.01)

    def test_w_one_is_bayes(self):
        data = Dataset([1, 4, 2])
        post = power_posterior_conjugate(Poisson(), GammaPrior(3.0, 1.0), data, 1.0)
        assert (post.shape, post.rate) == (10.0, 4.0)

    def test_w_zero_is_prior(self):
        prior = NormalPrior(1.0, 2.0)
        assert power_posterior_conjugate(NormalKnownVar(3.0), prior, Dataset([5.0, 7.0]), 0.0) == prior

    def test_precision_increasing_in_w(self):
        data = Dataset([0.1, 2.0, -1.0])
        precs = [power_posterior_conjugate(NormalKnownVar(2.0), NormalPrior(0, 0.1), data, w).precision
                 for w in np.linspace(0.01, 5, 50)]
        assert np.all(np.diff(precs) > 0)

    def test_unsupported(self):
        with pytest.raises(UnsupportedPairError):
            power_posterior_conjugate(Poisson(), NormalPrior(0, 1), Dataset([1.0]), 1.0)


class TestGrid:
    @pytest.mark.parametrize("w", [0.0, 0.3, 1.0, 2.5])
    def test_normal_matches_conjugate(self, w):
        data = Dataset(np.random.default_rng(0).normal(1.0, 2.0, 50))
        model, prior = NormalKnownVar(1.0), NormalPrior(0.0, 0.01)
        g = power_posterior_grid(model, prior, data, w)
        post = power_posterior_conjugate(model, prior, data, w)
        assert g.integral() == pytest.approx(1.0, abs=1e-6)
        mode = g.mode()
        assert g.at(mode) == pytest.approx(float(post.pdf(mode)), rel=1e-6)
        assert mode == pytest.approx(post.loc, abs=2 * (g.theta[1] - g.theta[0]))
        sd = math.sqrt(post.var)
        assert g.theta[0] <= post.loc - 6 * sd and g.theta[-1] >= post.loc + 6 * sd

    def test_poisson_matches_conjugate(self):
        data = Dataset([1, 5, 2])
        g = power_posterior_grid(Poisson(), GammaPrior(3.0, 1.0), data, 0.5)
        post = power_posterior_conjugate(Poisson(), GammaPrior(3.0, 1.0), data, 0.5)
        mode = g.mode()
        assert g.at(mode) == pytest.approx(float(post.pdf(mode)), rel=1e-6)
        assert g.mean() == pytest.approx(post.mean, rel=1e-8)

    def test_large_n_log_space(self):
        data = Dataset(np.random.default_rng(1).poisson(40.0, 1000))
        g = power_posterior_grid(Poisson(), GammaPrior(3.0, 1.0), data, 1.0)
        assert np.all(np.isfinite(g.density))
        assert g.integral() == pytest.approx(1.0, abs=1e-6)
        g = power_posterior_grid(NormalKnownVar(1.0), NormalPrior(0, 0.01),
                                 Dataset(np.random.default_rng(2).normal(500.0, 1.0, 1000)), 1.0)
        assert g.integral() == pytest.approx(1.0, abs=1e-6)

    def test_non_conjugate_laplace_grid(self):
        data = Dataset(np.random.default_rng(3).poisson(3.0, 40))
        prior = NormalPrior(1.0, 2.0)  # on the log-mean
        g = power_posterior_grid(poisson_natural(), prior, data, 0.8)
        assert g.integral() == pytest.approx(1.0, abs=1e-6)

        def unnorm(t):
            return math.exp(0.8 * (data.total * t - data.n * math.exp(t)) + float(prior.logpdf(t)) - 0.8 * (data.total * 1.1 - data.n * math.exp(1.1)))

        z, _ = sp_integrate.quad(unnorm, -5, 5, points=[1.0, 1.1, 1.2], epsabs=0, epsrel=1e-12, limit=500)
        mode = g.mode()
        assert g.at(mode) == pytest.approx(unnorm(mode) / z, rel=1e-6)


class TestDistance:
    def test_self_is_zero(self):
        g = tabulate(NormalPrior(0, 1), np.linspace(-8, 8, 2001))
        assert density_distance(g, g) == 0.0

    def test_disjoint(self):
        g1 = DensityGrid(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        g2 = DensityGrid(np.array([2.0, 3.0]), np.array([1.0, 1.0]))
        assert density_distance(g1, g2) == pytest.approx(2.0)

    def test_symmetric_and_oracle(self):
        g1 = tabulate(NormalPrior(0, 1.0), np.linspace(-10, 10, 4001))
        g2 = tabulate(NormalPrior(0, 0.25), np.linspace(-16, 16, 3001))
        d12, d21 = density_distance(g1, g2), density_distance(g2, g1)
        assert d12 == d21
        assert d12 == pytest.approx(L1_N01_N04, abs=1e-5)

    def test_shifted_unit_mass(self):
        g1 = tabulate(NormalPrior(0, 1.0), np.linspace(-10, 10, 4001))
        g2 = tabulate(NormalPrior(1.0, 1.0), np.linspace(-9, 11, 4001))
        exact = 2 * (2 * stats.norm.cdf(0.5) - 1)
        assert density_distance(g1, g2) == pytest.approx(exact, abs=1e-5)
