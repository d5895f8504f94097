import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.stats import norm

from kernelfm import (
    ConditionalPath,
    InputError,
    KernelSpec,
    PathSchedule,
    StateError,
    cond_density,
    cond_flow,
    cond_velocity,
    kernel_density,
)


def path(sigma_min, y, kind="gaussian", power=1.0):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return ConditionalPath(PathSchedule(sigma_min, power), KernelSpec(kind, len(y)), y)


class TestSchedule:
    @pytest.mark.parametrize("power", [1.0, 2.0, 0.5])
    def test_endpoints(self, power):
        s = PathSchedule(0.2, power)
        assert s.sigma(0.0) == pytest.approx(1.0)
        assert s.sigma(1.0) == pytest.approx(0.2)
        np.testing.assert_allclose(s.mu(0.0, [3.0, -1.0]), [0.0, 0.0])
        np.testing.assert_allclose(s.mu(1.0, [3.0, -1.0]), [3.0, -1.0])

    def test_linear_instance(self):
        s = PathSchedule(0.1)
        assert s.is_default
        assert s.sigma(0.25) == pytest.approx(1 - 0.9 * 0.25)
        assert s.sigma_dot(0.7) == pytest.approx(-0.9)
        np.testing.assert_allclose(s.mu_dot(0.3, [2.0, 5.0]), [2.0, 5.0])

    @pytest.mark.parametrize("power", [1.0, 3.0])
    def test_sigma_dot_matches_finite_difference(self, power):
        s = PathSchedule(0.05, power)
        t = np.linspace(0.05, 0.95, 7)
        h = 1e-6
        fd = (s.sigma(t + h) - s.sigma(t - h)) / (2 * h)
        np.testing.assert_allclose(s.sigma_dot(t), fd, rtol=1e-7, atol=1e-9)

    def test_positive_on_unit_interval(self):
        for power in (1.0, 2.0, 4.0):
            assert np.all(PathSchedule(0.01, power).sigma(np.linspace(0, 1, 1001)) > 0)

    def test_invalid_parameters(self):
        with pytest.raises(InputError):
            PathSchedule(0.0)
        with pytest.raises(InputError):
            PathSchedule(1.5)
        with pytest.raises(InputError):
            PathSchedule(0.5, power=0.0)


class TestCondFlow:
    def test_endpoint_is_anchor(self):
        np.testing.assert_allclose(cond_flow(path(0.5, [1.0]), 1.0, [0.0]), [1.0])

    def test_start_is_identity(self):
        np.testing.assert_allclose(cond_flow(path(0.5, [1.0]), 0.0, [2.0]), [2.0])

    def test_midpoint_substitution(self):
        np.testing.assert_allclose(cond_flow(path(0.1, [1.0, 0.0]), 0.5, [1.0, 1.0]), [1.05, 0.55])

    @pytest.mark.parametrize("t", [-0.01, 1.01, np.nan])
    def test_time_outside_unit_interval(self, t):
        with pytest.raises(InputError):
            cond_flow(path(0.5, [1.0]), t, [0.0])

    def test_anchor_dimension_checked(self):
        with pytest.raises(InputError):
            ConditionalPath(PathSchedule(), KernelSpec("gaussian", 2), (1.0,))


class TestCondVelocity:
    def test_constant_field_when_sigma_is_one(self):
        cp = path(1.0, [3.0])
        for t in (0.0, 0.4, 1.0):
            np.testing.assert_allclose(cond_velocity(cp, t, [-7.0]), [3.0])

    def test_substitution_at_start(self):
        np.testing.assert_allclose(cond_velocity(path(0.5, [1.0]), 0.0, [0.0]), [1.0])

    def test_substitution_at_end(self):
        np.testing.assert_allclose(cond_velocity(path(0.5, [1.0]), 1.0, [1.0]), [1.0])

    def test_nonpositive_sigma_is_a_state_error(self):
        class Collapsing(PathSchedule):
            def sigma(self, t):
                return np.zeros_like(np.asarray(t, dtype=float))

        cp = ConditionalPath(Collapsing(0.5), KernelSpec("gaussian", 1), (1.0,))
        with pytest.raises(StateError):
            cond_velocity(cp, 0.5, [0.0])


class TestCondDensity:
    def test_start_equals_kernel(self):
        cp = path(0.3, [2.0, -1.0])
        x = np.array([0.4, 0.7])
        assert cond_density(cp, 0.0, x) == pytest.approx(kernel_density(cp.kernel, x), rel=1e-14)

    def test_end_value(self):
        assert cond_density(path(0.1, [1.0]), 1.0, [1.0]) == pytest.approx(3.989, abs=5e-4)
        assert cond_density(path(0.1, [1.0]), 1.0, [1.0]) == pytest.approx(10 * norm.pdf(0), rel=1e-14)

    @pytest.mark.parametrize("t,y", [(0.0, 0.5), (0.3, -0.8), (0.9, 0.2), (1.0, 1.0)])
    def test_mass_one_d1(self, t, y):
        g = np.linspace(-12, 12, 40_001)
        vals = cond_density(path(0.1, [y]), t, g[:, None])
        assert trapezoid(vals, g) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("t", [0.2, 0.8])
    def test_mass_one_d2(self, t):
        g = np.linspace(-7, 7, 1401)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        vals = cond_density(path(0.2, [0.5, -0.3]), t, np.column_stack([xx.ravel(), yy.ravel()]))
        mass = trapezoid(trapezoid(vals.reshape(xx.shape), g, axis=1), g)
        assert mass == pytest.approx(1.0, abs=1e-4)

    def test_log_scale(self):
        cp = path(0.1, [0.0, 1.0])
        x = np.array([0.3, 0.2])
        assert np.exp(cond_density(cp, 0.7, x, log_scale=True)) == pytest.approx(cond_density(cp, 0.7, x), rel=1e-13)


@given(
    t=st.floats(0.01, 0.99),
    z=st.floats(-4, 4),
    y=st.floats(-3, 3),
    sigma_min=st.floats(0.05, 1.0),
    power=st.sampled_from([1.0, 2.0]),
)
def test_flow_derivative_matches_field(t, z, y, sigma_min, power):
    cp = path(sigma_min, [y], power=power)
    h = 1e-5
    fd = (cond_flow(cp, t + h, [z]) - cond_flow(cp, t - h, [z])) / (2 * h)
    np.testing.assert_allclose(fd, cond_velocity(cp, t, cond_flow(cp, t, [z])), atol=1e-6)


@pytest.mark.parametrize("t", [0.3, 0.75])
def test_pushforward_has_conditional_density(t):
    cp = path(0.2, [1.5])
    z = cp.kernel.sample(100_000, seed=3)
    pushed = np.sort(cond_flow(cp, t, z)[:, 0])
    g = np.linspace(-10, 10, 40_001)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(g) * (cond_density(cp, t, g[1:, None]) + cond_density(cp, t, g[:-1, None])))])
    model = np.interp(pushed, g, cdf)
    ecdf_hi = np.arange(1, len(pushed) + 1) / len(pushed)
    ks = max(np.max(ecdf_hi - model), np.max(model - (ecdf_hi - 1 / len(pushed))))
    assert ks <= 0.01
