import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcm import tails as T
from lfcm.errors import AllDegenerate, InvalidParam, TooFewTail


def pareto_quantiles(n, alpha, eps):
    p = (np.arange(1, n + 1) - 0.5) / n
    return eps * (1 - p) ** (-1 / alpha)


class TestStatistics:
    def test_single_sample_cdf_half(self):
        assert T.ks_from_cdf([0.5]) == 0.5
        assert T.kuiper_from_cdf([0.5]) == 1.0

    def test_perfect_quantiles(self):
        n = 40
        F = (np.arange(1, n + 1) - 0.5) / n
        assert T.ks_from_cdf(F) == pytest.approx(0.5 / n)
        assert T.kuiper_from_cdf(F) == pytest.approx(1.0 / n)

    def test_quantile_samples_ks_small(self):
        # the MLE on quantile-placed data is close but not equal to alpha, so
        # the bound is checked against the fitted CDF rather than the truth
        x = pareto_quantiles(200, 2.0, 1.0)
        assert T.ks_statistic(x, 1.0) < 0.02

    def test_ks_edge_enumeration(self):
        rng = np.random.default_rng(4)
        x = rng.pareto(1.5, 30) + 1.0
        tail = np.sort(x)
        a = len(tail) / np.sum(np.log(tail))
        F = 1 - tail ** -a
        best = 0.0
        for i, f in enumerate(F):
            best = max(best, abs((i + 1) / len(F) - f), abs(i / len(F) - f))
        assert T.ks_statistic(x, 1.0) == pytest.approx(best, abs=1e-14)

    def test_kuiper_loop(self):
        rng = np.random.default_rng(5)
        x = rng.pareto(2.0, 25) + 1.0
        tail = np.sort(x)
        n = len(tail)
        a = n / np.sum(np.log(tail))
        dp = dm = -np.inf
        for i in range(1, n + 1):
            f = 1 - tail[i - 1] ** -a
            dp = max(dp, i / n - f)
            dm = max(dm, f - (i - 1) / n)
        assert T.kuiper_statistic(x, 1.0) == pytest.approx(dp + dm, abs=1e-14)

    def test_ad_direct_sum(self):
        n = 10
        F = (np.arange(1, n + 1) - 0.5) / n
        want = -n - sum((2 * i - 1) / n * (math.log(F[i - 1]) + math.log(1 - F[n - i]))
                        for i in range(1, n + 1))
        assert T.ad_from_cdf(F) == pytest.approx(want, rel=1e-13)

    def test_ad_degenerate(self):
        assert T.ad_from_cdf([0.0, 0.4]) == math.inf
        # eps equal to the smallest tail sample puts F = 0 there
        assert T.ad_statistic([1.0, 2.0, 3.0], 1.0) == math.inf

    def test_ad_permutation(self):
        rng = np.random.default_rng(6)
        x = rng.pareto(2.0, 30) + 1.0
        assert T.ad_statistic(x, 0.9) == T.ad_statistic(rng.permutation(x), 0.9)

    def test_too_few(self):
        with pytest.raises(TooFewTail):
            T.ks_statistic([1.0, 5.0], 2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100.0))
    def test_scale_equivariance_and_ranges(self, seed, c):
        rng = np.random.default_rng(seed)
        x = rng.pareto(1.5, 20) + 1.0
        eps = 0.95
        for fn in (T.ks_statistic, T.ad_statistic, T.kuiper_statistic):
            assert fn(x * c, eps * c) == pytest.approx(fn(x, eps), rel=1e-9, abs=1e-12)
        assert 0 <= T.ks_statistic(x, eps) <= 1
        assert 0 < T.kuiper_statistic(x, eps) <= 2


class TestEstimateEpsilon:
    def test_single_grid_point(self):
        x = np.array([1.0, 1.5, 3.0, 8.0])
        fit = T.estimate_epsilon(x, "KS", grid=[1.2])
        assert fit.eps_hat == 1.2
        assert fit.n_tail == 3

    def test_all_degenerate(self):
        with pytest.raises(AllDegenerate):
            T.estimate_epsilon([1.0, 2.0, 3.0], "KS", grid=[2.5, 10.0])

    def test_bad_grid(self):
        with pytest.raises(InvalidParam):
            T.estimate_epsilon([1.0, 2.0, 3.0], "KS", grid=[2.0, 1.0])

    def test_pure_pareto(self):
        eps, decile, alphas = [], [], []
        for s in range(10):
            rng = np.random.default_rng(s)
            x = rng.pareto(2.5, 500) + 1.0
            grid = T.default_grid(x)
            fit = T.estimate_epsilon(x, "KS", grid)
            eps.append(fit.eps_hat)
            decile.append(grid[0] + 0.1 * (grid[-1] - grid[0]))
            alphas.append(fit.alpha_hat)
        assert np.all(np.array(eps) <= np.array(decile))
        assert abs(np.mean(alphas) - 2.5) < 0.15

    def test_deterministic(self):
        x = T.generate_calibration_samples(60, 2.5, 1.0, np.random.default_rng(0))
        assert T.estimate_epsilon(x, "Kuiper") == T.estimate_epsilon(x, "Kuiper")

    def test_ties_go_small(self, monkeypatch):
        monkeypatch.setattr(T, "_scan", lambda s, g, m: (np.array([0.3, 0.1, 0.1]), np.ones(3)))
        fit = T.estimate_epsilon([1.0, 2.0, 4.0], "KS", grid=[0.5, 0.7, 0.9])
        assert fit.eps_hat == 0.7


class TestNeighborhood:
    def test_k1_matches_plain(self):
        x = T.generate_calibration_samples(80, 2.5, 1.0, np.random.default_rng(2))
        a = T.estimate_epsilon(x, "Kuiper")
        b = T.neighborhood_average(x, "Kuiper", k=1)
        assert (a.eps_hat, a.alpha_hat) == (b.eps_hat, b.alpha_hat)

    def test_constant_statistic_symmetric(self, monkeypatch):
        grid = np.arange(1.0, 10.0)
        monkeypatch.setattr(T, "_scan", lambda s, g, m: (np.zeros(g.size), np.ones(g.size)))
        fit = T.neighborhood_average(np.arange(1.0, 12.0), "Kuiper", grid, k=3, r=5.0)
        # argmin is the first grid point, its three nearest are 1, 2, 3
        assert fit.eps_hat == pytest.approx(2.0)

    def test_radius_restricts(self, monkeypatch):
        grid = np.arange(1.0, 10.0)
        stat = np.array([5, 0.1, 5, 5, 5, 5, 5, 0.2, 0.3])
        monkeypatch.setattr(T, "_scan", lambda s, g, m: (stat.astype(float), g.copy()))
        fit = T.neighborhood_average(np.arange(1.0, 12.0), "Kuiper", grid, k=2, r=1.0)
        assert fit.eps_hat == pytest.approx(1.5)
        assert fit.alpha_hat == pytest.approx(1.5)


class TestCalibrationSamples:
    def test_tail_mass(self):
        n = 20000
        x = T.generate_calibration_samples(n, 2.5, 1.0, np.random.default_rng(0))
        assert abs(np.mean(x >= 1.0) - T.calibration_tail_mass(2.5, 1.0)) < 3 / math.sqrt(n)

    def test_guard(self):
        with pytest.raises(InvalidParam):
            T.generate_calibration_samples(10, 2e3, 1.0, np.random.default_rng(0))

    def test_tail_slope(self):
        x = T.generate_calibration_samples(10000, 2.5, 1.0, np.random.default_rng(1))
        tail = np.sort(x[x >= 1.0])
        surv = 1 - np.arange(tail.size) / tail.size
        keep = surv > 1e-3
        slope = np.polyfit(np.log(tail[keep]), np.log(surv[keep]), 1)[0]
        assert abs(slope + 2.5) < 0.2

    def test_body_below_eps(self):
        x = T.generate_calibration_samples(5000, 2.5, 3.0, np.random.default_rng(2))
        body = x[x < 3.0]
        assert body.min() >= 0
        # truncated exponential mean on [0, eps)
        lam = 2.5 / 3.0
        want = 1 / lam - 3.0 * math.exp(-2.5) / (1 - math.exp(-2.5))
        assert abs(body.mean() - want) < 4 * body.std() / math.sqrt(body.size)
