import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from kernelfm import InputError, KdeModel, SineChart, arc_w1, largest_gap, mean_distance, project, sample_manifold

CHART = SineChart()


def brute_force_param(p, step=1e-6):
    y = np.arange(-3.0, 3.0 + step / 2, step)
    return y[np.argmin((y - p[0]) ** 2 + (np.sin(y) - p[1]) ** 2)]


def test_arc_length_against_quadrature():
    ref, _ = integrate.quad(lambda y: np.sqrt(1 + np.cos(y) ** 2), -3, 3, epsabs=1e-13)
    assert CHART.length == pytest.approx(ref, rel=1e-8)
    mid, _ = integrate.quad(lambda y: np.sqrt(1 + np.cos(y) ** 2), -3, 0.7)
    assert CHART.arc_of_param(0.7) == pytest.approx(mid, rel=1e-8)
    assert CHART.param_of_arc(mid) == pytest.approx(0.7, abs=1e-7)


def test_reach_estimate():
    # maximal curvature of the sine graph is 1 at y = +-pi/2; no closer double normal
    assert CHART.reach == pytest.approx(1.0, abs=1e-6)


def test_radius_at_reach_rejected():
    with pytest.raises(AssertionError):
        SineChart(tube_radius=1.01)
    with pytest.raises(InputError):
        SineChart(tube_radius=0.0)


class TestSampling:
    def test_samples_on_curve(self):
        for mode in ("arc_uniform", "x_uniform"):
            s = sample_manifold(CHART, 1000, seed=0, mode=mode)
            assert s.shape == (1000, 2)
            np.testing.assert_allclose(s[:, 1], np.sin(s[:, 0]), atol=1e-12)
            assert np.all(np.abs(s[:, 0]) <= 3.0)

    def test_arc_coordinate_is_uniform(self):
        s = CHART.sample(100_000, seed=1)
        arcs = CHART.arc_of_param(s[:, 0]) / CHART.length
        assert stats.kstest(arcs, "uniform").statistic <= 0.01

    def test_x_uniform_is_uniform_in_parameter(self):
        s = CHART.sample(20_000, seed=2, mode="x_uniform")
        assert abs(s[:, 0].mean()) <= 0.03
        assert stats.kstest(s[:, 0], stats.uniform(-3, 6).cdf).statistic <= 0.02

    def test_bad_arguments(self):
        with pytest.raises(InputError):
            CHART.sample(0)
        with pytest.raises(InputError):
            CHART.sample(5, mode="radial")

    def test_seeded(self):
        np.testing.assert_array_equal(CHART.sample(50, seed=3), CHART.sample(50, seed=3))


class TestProjection:
    def test_point_on_curve(self):
        pr = project(CHART, [1.2, np.sin(1.2)])
        assert pr.param == pytest.approx(1.2, abs=1e-10)
        assert pr.dist == pytest.approx(0.0, abs=1e-10)
        assert pr.in_tube

    def test_against_brute_force(self):
        for p in ([0.0, 2.0], [0.3, -0.4], [-2.5, 1.1], [1.5707963, 0.2]):
            pr = project(CHART, p)
            assert pr.param == pytest.approx(brute_force_param(np.array(p)), abs=2e-6)

    def test_far_point_clamps_to_endpoint(self):
        pr = project(CHART, [10.0, 0.0])
        assert pr.param == 3.0
        np.testing.assert_allclose(pr.foot, [3.0, np.sin(3.0)])
        assert not pr.in_tube

    def test_batched_matches_single(self):
        pts = np.random.default_rng(4).uniform(-3, 3, (30, 2))
        batch = project(CHART, pts)
        for i, p in enumerate(pts):
            assert project(CHART, p).param == pytest.approx(batch.param[i], abs=1e-9)

    def test_rejects_bad_points(self):
        with pytest.raises(InputError):
            project(CHART, [1.0, 2.0, 3.0])
        with pytest.raises(InputError):
            project(CHART, [np.nan, 0.0])

    @given(st.floats(-3.5, 3.5), st.floats(-2.0, 2.0))
    def test_no_grid_point_is_closer(self, x, y):
        pr = project(CHART, [x, y])
        grid = np.linspace(-3, 3, 6001)
        d = np.hypot(grid - x, np.sin(grid) - y)
        assert pr.dist <= d.min() + 1e-12

    @given(st.floats(-2.9, 2.9), st.floats(-0.24, 0.24))
    def test_idempotent(self, y, off):
        pr = project(CHART, [y, np.sin(y) + off])
        again = project(CHART, pr.foot)
        assert again.param == pytest.approx(pr.param, abs=1e-9)
        assert again.dist == pytest.approx(0.0, abs=1e-9)

    @given(st.floats(-2.8, 2.8), st.floats(0, 2 * np.pi), st.floats(0, 0.2),
           st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
    def test_lipschitz_inside_tube(self, y, angle, rad, dx, dy):
        c, s = np.cos(angle), np.sin(angle)
        p = np.array([y + rad * c, np.sin(y) + rad * s])
        q = p + [dx, dy]
        pp, pq = project(CHART, p), project(CHART, q)
        if not (pp.in_tube and pq.in_tube):
            return
        bound = np.hypot(dx, dy) / (1 - CHART.tube_radius / CHART.reach)
        assert np.linalg.norm(pp.foot - pq.foot) <= bound + 1e-9


class TestStatistics:
    def test_mean_distance_on_curve_is_zero(self):
        assert mean_distance(CHART, CHART.sample(100, seed=5)) == pytest.approx(0.0, abs=1e-10)

    def test_mean_distance_of_vertical_offset(self):
        # a vertical offset h at y = 0 sits at distance h / sqrt(2) to first order
        assert mean_distance(CHART, [[0.0, 1e-3]]) == pytest.approx(1e-3 / np.sqrt(2), rel=1e-6)

    def test_mean_distance_of_narrow_kde(self):
        kde = KdeModel(CHART.sample(200, seed=6), 0.01)
        d = mean_distance(CHART, kde.sample(512, seed=7))
        assert 0 < d <= 0.02

    def test_largest_gap_examples(self):
        ys = np.array([-1.0, 0.0, 2.0])
        gap = largest_gap(CHART, CHART.g(ys))
        assert gap == pytest.approx(CHART.arc_of_param(2.0) - CHART.arc_of_param(0.0), rel=1e-12)
        assert largest_gap(CHART, CHART.g([0.5])) == 0.0
        with_ends = largest_gap(CHART, CHART.g([0.5]), include_boundary=True)
        s = CHART.arc_of_param(0.5)
        assert with_ends == pytest.approx(max(s, CHART.length - s), rel=1e-12)

    def test_largest_gap_of_uniform_sample(self):
        assert largest_gap(CHART, CHART.sample(512, seed=8)) <= 0.2

    def test_arc_w1_examples(self):
        a = CHART.g([0.0, 1.0])
        assert arc_w1(CHART, a, a).value == 0.0
        shift = arc_w1(CHART, CHART.g([0.0]), CHART.g([1.0]))
        assert shift.value == pytest.approx(CHART.arc_of_param(1.0) - CHART.arc_of_param(0.0), rel=1e-12)
        far = arc_w1(CHART, [[0.0, 5.0]], CHART.g([1.0]))
        assert far.outside_a == 1 and far.outside_b == 0
        assert far.value == pytest.approx(shift.value, rel=1e-12)

    def test_arc_w1_requires_equal_sizes(self):
        with pytest.raises(InputError):
            arc_w1(CHART, CHART.g([0.0, 1.0]), CHART.g([1.0]))

    def test_arc_w1_shrinks_with_sample_size(self):
        med = []
        for n in (128, 512, 2048):
            vals = [arc_w1(CHART, CHART.sample(n, seed=100 + r), CHART.sample(n, seed=200 + r)).value
                    for r in range(5)]
            med.append(np.median(vals))
        assert med[0] > med[1] > med[2]
