import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from lfcm.core import (GpsRecord, Trajectory, build_delta_series, normalize_coordinates)
from lfcm.errors import NonMonotoneTime, TooShort


def traj(points, times):
    return Trajectory(t=np.asarray(times, float), xy=np.asarray(points, float))


class TestDeltaSeries:
    def test_pythagorean(self):
        d = build_delta_series(traj([(0, 0), (3, 4)], [0, 10]))
        np.testing.assert_array_equal(d.dx, [[3, 4]])
        assert d.dt[0] == 10 and d.dr[0] == 5
        assert d.theta[0] == pytest.approx(math.atan2(4, 3))

    def test_zero_displacement(self):
        d = build_delta_series(traj([(1, 1), (1, 1)], [0, 5]))
        assert d.dr[0] == 0 and d.theta[0] == 0

    def test_brute_force(self):
        pts = [(0.0, 0.0), (1.0, -2.0), (-0.5, 0.3), (4.0, 4.0)]
        ts = [0.0, 3.0, 3.5, 20.0]
        d = build_delta_series(traj(pts, ts))
        for i in range(3):
            (x0, y0), (x1, y1) = pts[i], pts[i + 1]
            assert d.dr[i] == pytest.approx(math.dist((x0, y0), (x1, y1)), rel=1e-15)
            assert d.dt[i] == ts[i + 1] - ts[i]
            assert d.theta[i] == pytest.approx(math.atan2(y1 - y0, x1 - x0) % (2 * math.pi))

    def test_errors(self):
        with pytest.raises(TooShort):
            build_delta_series(traj([(0, 0)], [0]))
        with pytest.raises(NonMonotoneTime):
            build_delta_series(traj([(0, 0), (1, 1), (2, 2)], [0, 2, 2]))

    def test_time_unit(self):
        d = build_delta_series(traj([(0, 0), (3, 4)], [0, 120]), time_unit=60)
        assert d.dt[0] == 2.0 and d.ratio[0] == 2.5

    def test_original_untouched(self):
        tr = traj([(0, 0), (1, 1)], [0, 1])
        d = build_delta_series(tr)
        d.loc[0] = 99
        assert tr.xy[0, 0] == 0

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(float, (8, 2), elements=st.floats(-50, 50, allow_subnormal=False)), st.floats(-1e6, 1e6))
    def test_shift_and_telescoping(self, xy, c):
        ts = np.cumsum(np.linspace(1, 8, 8))
        a = build_delta_series(traj(xy, ts))
        b = build_delta_series(traj(xy, ts + c))
        np.testing.assert_allclose(a.dt, b.dt, rtol=1e-9)
        np.testing.assert_array_equal(a.dx, b.dx)
        np.testing.assert_allclose(a.dx.sum(axis=0), xy[-1] - xy[0], atol=1e-9)
        np.testing.assert_allclose(a.dr, [math.hypot(*v) for v in a.dx], rtol=1e-15)
        assert np.all((a.theta >= 0) & (a.theta < 2 * math.pi))


class TestRecords:
    def test_dedupe_and_sort(self):
        recs = [GpsRecord("d", 5.0, (1.0, 1.0)), GpsRecord("d", 1.0, (0.0, 0.0)),
                GpsRecord("d", 5.0, (9.0, 9.0))]
        tr = Trajectory.from_records(recs)
        np.testing.assert_array_equal(tr.t, [1.0, 5.0])
        np.testing.assert_array_equal(tr.xy[1], [1.0, 1.0])
        assert tr.n_dropped_duplicates == 1


class TestNormalize:
    def test_centroid_origin(self):
        tr = traj([(10.0, 45.0), (10.2, 45.2), (10.1, 45.1)], [0, 1, 2])
        out, _ = normalize_coordinates(tr)
        np.testing.assert_allclose(out.xy.mean(axis=0), 0.0, atol=1e-12)

    def test_passthrough(self):
        tr = traj([(0.3, 0.4), (1.0, 2.0)], [0, 1])
        out, _ = normalize_coordinates(tr, project=False)
        np.testing.assert_array_equal(out.xy, tr.xy)

    def test_degree_at_equator(self):
        tr = traj([(-0.5, 0.0), (0.5, 0.0)], [0, 1])
        out, _ = normalize_coordinates(tr)
        # arc length of 1 degree on the equatorial radius
        assert out.xy[1, 0] - out.xy[0, 0] == pytest.approx(2 * math.pi * 6378.137 / 360, rel=1e-12)
        assert out.xy[1, 0] - out.xy[0, 0] == pytest.approx(111.32, abs=0.01)

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(float, (5, 2), elements=st.floats(-60, 60)))
    def test_round_trip(self, ll):
        tr = traj(ll, np.arange(5.0))
        out, rec = normalize_coordinates(tr)
        np.testing.assert_allclose(rec.invert(out.xy), ll, rtol=1e-9, atol=1e-9)
