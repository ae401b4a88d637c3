import numpy as np
import pytest

from lfcm.core import Trajectory, build_delta_series
from lfcm.errors import EmptyGrid, InvalidParam
from lfcm.mcmc import GroupSummary, Hyperparams, LatentState, PosteriorScan
from lfcm.simulate import (GenerativeParams, RoutineConfig, interpolate_extrapolate,
                           linear_interpolate_extrapolate, params_from_scan, routine_mixture,
                           simulate_from_params, simulate_routine, subsample)


def brownian_params(S=0.01, drift=(0.0, 0.0), **kw):
    base = dict(weights=np.array([1.0]), drifts=np.array([drift], float), dispersions=np.array([S * np.eye(2)]),
                jump_prob=0.0, return_prob=0.0, region_centers=np.zeros((0, 2)), region_covs=np.zeros((0, 2, 2)),
                region_weights=np.zeros(0), alpha=1.5, eps=0.1)
    base.update(kw)
    return GenerativeParams(**base)


class TestRoutine:
    def test_layout(self):
        cfg = RoutineConfig()
        tr, ph = simulate_routine(cfg, np.random.default_rng(0), return_phases=True)
        assert len(tr) == 228
        assert np.all(np.diff(tr.t) > 0)
        assert (ph == "home").sum() == 52 and (ph == "work").sum() == 48 and (ph == "public").sum() == 78
        assert (ph == "travel").sum() == 50
        stay = ph == "work"
        np.testing.assert_allclose(tr.xy[stay].mean(axis=0), [1, 1], atol=0.05)

    def test_travel_on_segment(self):
        tr, ph = simulate_routine(RoutineConfig(), np.random.default_rng(1), return_phases=True)
        t = tr.t / 60
        leg = (ph == "travel") & (t < 540)
        # home -> work lies on the diagonal between (0,0) and (1,1)
        np.testing.assert_allclose(tr.xy[leg, 0], tr.xy[leg, 1])
        assert np.all((tr.xy[leg] >= 0) & (tr.xy[leg] <= 1))

    def test_mixture(self):
        w, c, S = routine_mixture(RoutineConfig())
        np.testing.assert_allclose(w, np.array([520, 480, 390]) / 1390)
        np.testing.assert_allclose(S[2], 0.04 * np.eye(2))

    def test_days_and_validation(self):
        tr = simulate_routine(RoutineConfig(days=2), np.random.default_rng(0))
        assert len(tr) == 456 and tr.t[-1] > 86400
        with pytest.raises(InvalidParam):
            RoutineConfig(days=0)

    def test_subsample(self):
        tr = simulate_routine(RoutineConfig(), np.random.default_rng(0))
        sub = subsample(tr, 0.25, np.random.default_rng(0))
        assert len(sub) == 57 and np.all(np.diff(sub.t) > 0)
        assert set(sub.t) <= set(tr.t)
        assert subsample(tr, 1.0, np.random.default_rng(0)) is tr
        with pytest.raises(InvalidParam):
            subsample(tr, 0, np.random.default_rng(0))


class TestParams:
    def test_validation(self):
        with pytest.raises(InvalidParam):
            brownian_params(weights=np.array([0.5]))
        with pytest.raises(InvalidParam):
            brownian_params(jump_prob=1.5)
        with pytest.raises(InvalidParam):
            brownian_params(jump_prob=0.5, return_prob=0.5)

    def test_from_scan(self):
        tr = Trajectory(np.arange(4) * 60.0, [[0, 0], [0.01, 0], [3, 3], [3.01, 3]])
        d = build_delta_series(tr, 60.0)
        st = LatentState(np.array([0, 1, 0], np.int8), np.zeros(3, np.int64), np.zeros(3, np.int8),
                         np.full(3, -1, np.int64), 1)
        sc = PosteriorScan(st, 0.0, 1, [GroupSummary(2, np.zeros(2), 0.01 * np.eye(2))], 0)
        h = Hyperparams(eps=0.1)
        p = params_from_scan(d, sc, h)
        b1, b2 = h.jump_beta
        assert p.jump_prob == pytest.approx((b1 + 1) / (b1 + b2 + 3))
        vp, ze = h.pareto_gamma
        assert p.alpha == pytest.approx((vp + 1) / (ze + np.log(d.ratio[1] / 0.1)))
        assert len(p.region_centers) == 2


class TestSimulation:
    def test_brownian_increments(self):
        p = brownian_params(S=0.02, drift=(0.1, 0.0))
        t = np.arange(4001) * 120.0
        sim = simulate_from_params(p, t, [0, 0], np.random.default_rng(0))
        inc = np.diff(sim.xy, axis=0)
        np.testing.assert_allclose(inc.mean(axis=0), [0.2, 0], atol=0.01)
        np.testing.assert_allclose(np.cov(inc.T), 0.04 * np.eye(2), atol=0.004)

    def test_pure_jumps_exceed_eps(self):
        p = brownian_params(jump_prob=1.0, alpha=2.0, eps=0.3)
        t = np.arange(500) * 60.0
        d = build_delta_series(simulate_from_params(p, t, [0, 0], np.random.default_rng(2)), 60.0)
        assert np.all(d.ratio >= 0.3 - 1e-12)
        # Pareto MLE of the ratios recovers alpha
        alpha = len(d.ratio) / np.log(d.ratio / 0.3).sum()
        assert alpha == pytest.approx(2.0, rel=0.15)

    def test_returns_land_in_region(self):
        p = brownian_params(jump_prob=1.0, return_prob=1.0, region_centers=np.array([[5.0, 5.0]]),
                            region_covs=np.array([1e-6 * np.eye(2)]), region_weights=np.array([1.0]))
        sim = simulate_from_params(p, np.arange(20) * 60.0, [0, 0], np.random.default_rng(0))
        np.testing.assert_allclose(sim.xy[1:], 5.0, atol=0.01)

    def test_deterministic_and_errors(self):
        p = brownian_params()
        t = np.arange(10) * 60.0
        a = simulate_from_params(p, t, [0, 0], np.random.default_rng(7))
        b = simulate_from_params(p, t, [0, 0], np.random.default_rng(7))
        np.testing.assert_array_equal(a.xy, b.xy)
        with pytest.raises(EmptyGrid):
            simulate_from_params(p, [], [0, 0], np.random.default_rng(0))
        with pytest.raises(InvalidParam):
            simulate_from_params(p, [0, 0], [0, 0], np.random.default_rng(0))


class TestInterpolation:
    def setup_method(self):
        self.tr = Trajectory([0.0, 600.0, 1200.0], [[0, 0], [1, 0], [1, 1]])
        d = build_delta_series(self.tr, 60.0)
        st = LatentState(np.array([0, 0], np.int8), np.zeros(2, np.int64), np.zeros(2, np.int8),
                         np.full(2, -1, np.int64), 1)
        self.scan = PosteriorScan(st, 0.0, 1, [GroupSummary(2, np.zeros(2), 1e-3 * np.eye(2))], 0)
        self.params = brownian_params(S=1e-3)

    def test_linear(self):
        out = linear_interpolate_extrapolate(self.tr, [-60.0, 300.0, 900.0, 1500.0])
        np.testing.assert_allclose(out.xy, [[0, 0], [0.5, 0], [1, 0.5], [1, 1]])

    def test_passes_through_fixes(self):
        g = np.arange(0, 1201, 60.0)
        out = interpolate_extrapolate(self.tr, self.scan, self.params, g, np.random.default_rng(0))
        np.testing.assert_allclose(out.xy[[0, 10, 20]], self.tr.xy)

    def test_bridge_moments(self):
        # midpoint of the first 10-minute gap: mean (0.5, 0), variance 5 * 5 / 10 * 1e-3
        g = np.array([300.0])
        draws = np.array([interpolate_extrapolate(self.tr, self.scan, self.params, g,
                                                  np.random.default_rng(s)).xy[0] for s in range(3000)])
        np.testing.assert_allclose(draws.mean(axis=0), [0.5, 0], atol=0.005)
        np.testing.assert_allclose(draws.var(axis=0), 2.5e-3, rtol=0.1)

    def test_extrapolation_spreads(self):
        g = np.array([1200.0 + 60 * 100])
        draws = np.array([interpolate_extrapolate(self.tr, self.scan, self.params, g,
                                                  np.random.default_rng(s)).xy[0] for s in range(2000)])
        np.testing.assert_allclose(draws.var(axis=0), 0.1, rtol=0.15)

    def test_jump_gap(self):
        st = self.scan.state.copy()
        st.b[:] = [1, 0]
        sc = PosteriorScan(st, 0.0, 1, self.scan.groups, 0)
        out = interpolate_extrapolate(self.tr, sc, self.params, np.arange(0, 600, 30.0), np.random.default_rng(0))
        # before the jump the path sits at the origin, after it at the destination
        assert all(tuple(x) in {(0.0, 0.0), (1.0, 0.0)} for x in out.xy)

    def test_errors(self):
        with pytest.raises(EmptyGrid):
            interpolate_extrapolate(self.tr, self.scan, self.params, [], np.random.default_rng(0))
        with pytest.raises(InvalidParam):
            linear_interpolate_extrapolate(self.tr, [2.0, 1.0])
