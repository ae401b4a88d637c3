import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from lfcm.core import Trajectory
from lfcm.errors import EmptyInput, InvalidParam, TooFewGroups, TooShort
from lfcm.metrics import (eccdf, jump_lengths, metric_table, msd, new_locations_curve,
                          new_locations_exponent, pooled_alpha, radius_of_gyration, summarize)

coords = hnp.arrays(float, st.tuples(st.integers(2, 30), st.just(2)),
                    elements=st.floats(-100, 100, allow_nan=False))


def rot(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


class TestBasicMetrics:
    def test_square_path(self):
        xy = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        np.testing.assert_allclose(jump_lengths(xy), [1, 1, 1])
        assert msd(xy) == pytest.approx((1 + 2 + 1) / 3)
        assert radius_of_gyration(xy) == pytest.approx(math.sqrt(0.5))

    def test_trajectory_input(self):
        t = Trajectory(np.arange(3.0), [[0, 0], [3, 4], [3, 4]])
        np.testing.assert_allclose(jump_lengths(t), [5, 0])

    def test_errors(self):
        with pytest.raises(TooShort):
            jump_lengths(np.zeros((1, 2)))
        with pytest.raises(TooShort):
            msd(np.zeros((1, 2)))
        with pytest.raises(EmptyInput):
            radius_of_gyration(np.zeros((0, 2)))

    @settings(max_examples=60, deadline=None)
    @given(coords, st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 2 * math.pi))
    def test_rigid_motion_invariance(self, xy, a, b, theta):
        moved = xy @ rot(theta).T + [a, b]
        scale = 1 + np.abs(xy).max() ** 2
        assert abs(msd(moved) - msd(xy)) <= 1e-12 * scale * 100
        assert radius_of_gyration(moved) == pytest.approx(radius_of_gyration(xy), rel=1e-9, abs=1e-9)

    def test_rigid_motion_exact_scale(self):
        rng = np.random.default_rng(3)
        xy = rng.random((50, 2))
        moved = xy @ rot(0.7).T + [3.0, -2.0]
        assert abs(msd(moved) - msd(xy)) < 1e-12
        assert abs(radius_of_gyration(moved) - radius_of_gyration(xy)) < 1e-12


class TestEccdf:
    def test_values(self):
        x, s = eccdf([3, 1, 2, 2])
        np.testing.assert_array_equal(x, [1, 2, 3])
        np.testing.assert_allclose(s, [1, 0.75, 0.25])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            eccdf([])

    @given(hnp.arrays(float, st.integers(1, 60), elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_monotone(self, v):
        x, s = eccdf(v)
        assert s[0] == 1.0
        assert np.all(np.diff(s) < 0)
        assert np.all(np.diff(x) > 0)
        # survival at each x recounted directly
        np.testing.assert_allclose(s, [(v >= xi).mean() for xi in x])


class TestNewLocations:
    def test_curve(self):
        t = Trajectory([0, 1, 2, 3], [[0, 0], [0.01, 0], [1, 1], [0, 0]])
        tau, frac = new_locations_curve(t, cell_size=0.05)
        np.testing.assert_allclose(tau, [0, 1 / 3, 2 / 3, 1])
        np.testing.assert_allclose(frac, [0.5, 0.5, 1, 1])

    def test_exponent_linear_growth(self):
        n = 50
        t = Trajectory(np.arange(n, dtype=float), np.column_stack([np.arange(n), np.zeros(n)]))
        tau, frac = new_locations_curve(t, 0.5)
        assert frac[-1] == 1
        # each fix a new cell: frac = (k + 1) / n against tau = k / (n - 1)
        assert new_locations_exponent(t, 0.5) == pytest.approx(
            np.polyfit(np.log(tau[1:]), np.log(frac[1:]), 1)[0])

    def test_bad_cell(self):
        with pytest.raises(InvalidParam):
            new_locations_curve(Trajectory([0, 1], [[0, 0], [1, 1]]), 0)


class TestPooling:
    def test_fe_is_inverse_variance_mean(self):
        mu, (lo, hi), t2 = pooled_alpha([1.0, 2.0], [1.0, 1.0], "FE")
        assert mu == 1.5 and t2 == 0
        assert hi - lo == pytest.approx(2 * 1.96 / math.sqrt(2))

    def test_homogeneous_gives_zero_tau(self):
        for m in ("REML", "DL"):
            assert pooled_alpha([1.7, 1.7, 1.7], [0.1, 0.2, 0.1], m)[2] == 0

    def test_dl_closed_form(self):
        a = np.array([1.0, 2.0, 3.5, 1.2])
        se = np.array([0.2, 0.3, 0.25, 0.4])
        w = 1 / se ** 2
        mu = (w * a).sum() / w.sum()
        q = (w * (a - mu) ** 2).sum()
        t2 = (q - 3) / (w.sum() - (w ** 2).sum() / w.sum())
        assert pooled_alpha(a, se, "DL")[2] == pytest.approx(t2)

    def test_reml_maximizes_restricted_likelihood(self):
        a = np.array([1.6, 1.9, 1.4, 2.2, 1.75])
        se = np.array([0.05, 0.1, 0.08, 0.12, 0.06])

        def rll(t2):
            v = se ** 2 + t2
            w = 1 / v
            mu = (w * a).sum() / w.sum()
            return -0.5 * (np.log(v).sum() + math.log(w.sum()) + (w * (a - mu) ** 2).sum())

        grid = np.linspace(0, 0.5, 50001)
        t2_grid = grid[np.argmax([rll(t) for t in grid])]
        assert pooled_alpha(a, se, "REML")[2] == pytest.approx(t2_grid, abs=2e-5)

    def test_errors(self):
        with pytest.raises(TooFewGroups):
            pooled_alpha([1.0], [0.1])
        with pytest.raises(InvalidParam):
            pooled_alpha([1.0, 2.0], [0.1, 0.0])
        with pytest.raises(InvalidParam):
            pooled_alpha([1.0, 2.0], [0.1, 0.1], "bogus")


class TestSummary:
    def test_population_sd(self):
        a = Trajectory([0, 1], [[0, 0], [1, 0]])
        b = Trajectory([0, 1], [[0, 0], [3, 0]])
        obs, sim = metric_table([a, b], [a])
        assert obs.mean_jump_length == 2 and obs.sd_jump_length == 1
        assert obs.msd == 5 and obs.sd_msd == 4
        assert sim.sd_rog == 0
        assert set(obs.as_row()) == {"mean_jump_length", "msd", "rog", "sd_jump_length", "sd_msd", "sd_rog"}

    def test_empty(self):
        with pytest.raises(EmptyInput):
            summarize([])
