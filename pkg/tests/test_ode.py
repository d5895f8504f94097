import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kernelfm import (
    ConditionalPath,
    Dataset,
    EmpiricalField,
    EvaluationError,
    InputError,
    KernelSpec,
    NonConvergenceError,
    OdeConfig,
    PathSchedule,
    integrate,
    integrate_batch,
    pointwise,
)


def zero(t, x):
    return np.zeros_like(x)


def linear(t, x):
    return x


def cond_field(sigma_min, y):
    cp = ConditionalPath(PathSchedule(sigma_min), KernelSpec("gaussian", len(y)), y)
    return lambda t, x: cp.velocity(t, x)


def test_zero_field_one_step():
    traj = integrate(zero, [1.5, -2.0])
    np.testing.assert_array_equal(traj.endpoint, [1.5, -2.0])
    assert traj.accepted_steps == 1 and traj.rejected_steps == 0


def test_linear_ode():
    traj = integrate(linear, [1.0])
    assert traj.endpoint[0] == pytest.approx(np.e, abs=10 * 1e-5)


def test_conditional_flow_endpoint():
    end = integrate(cond_field(0.1, np.array([1.0])), [0.3]).endpoint
    assert end[0] == pytest.approx(1.03, abs=10 * 1e-5)


def test_trajectory_shape():
    traj = integrate(cond_field(0.1, np.array([1.0, -1.0])), [0.3, 0.2])
    assert traj.times[0] == 0.0 and traj.times[-1] == 1.0
    assert np.all(np.diff(traj.times) > 0)
    np.testing.assert_array_equal(traj.states[0], [0.3, 0.2])
    assert len(traj.states) == traj.accepted_steps + 1


def test_matches_reference_solver():
    def f(t, x):
        return np.column_stack([np.sin(3 * t) * x[:, 1], -x[:, 0] + 0.5 * np.cos(x[:, 1])])

    x0 = np.array([0.7, -0.4])
    ref = solve_ivp(lambda t, y: f(np.array([t]), y[None])[0], (0, 1), x0, rtol=1e-12, atol=1e-12).y[:, -1]
    end = integrate(f, x0, OdeConfig(atol=1e-9, rtol=1e-9)).endpoint
    np.testing.assert_allclose(end, ref, atol=1e-8)


def test_tolerance_consistency():
    fld = cond_field(0.1, np.array([1.0]))
    coarse = integrate(fld, [0.3], OdeConfig(atol=1e-4, rtol=1e-4)).endpoint
    fine = integrate(fld, [0.3], OdeConfig(atol=5e-5, rtol=5e-5)).endpoint
    assert abs(coarse[0] - fine[0]) <= 1e-4


def test_rk4_agrees_with_dopri5():
    a = integrate(linear, [1.0], OdeConfig(method="rk4_fixed", fixed_step_count=2**12)).endpoint
    b = integrate(linear, [1.0], OdeConfig(atol=1e-8, rtol=1e-8)).endpoint
    assert abs(a[0] - b[0]) <= 1e-6
    assert a[0] == pytest.approx(np.e, abs=1e-12)


def test_empty_batch():
    assert integrate_batch(linear, np.zeros((0, 2))).shape == (0, 2)
    assert integrate_batch(linear, []).size == 0


def test_batch_of_one_equals_integrate():
    fld = cond_field(0.2, np.array([0.5, 0.5]))
    np.testing.assert_array_equal(integrate_batch(fld, [[0.1, 0.9]])[0], integrate(fld, [0.1, 0.9]).endpoint)


def test_rows_are_error_controlled_independently():
    data = Dataset(np.random.default_rng(0).uniform(-1, 1, (30, 2)))
    fld = EmpiricalField(data, PathSchedule(0.1))
    starts = np.random.default_rng(1).normal(size=(16, 2))
    batch = integrate_batch(fld, starts)
    alone = np.array([integrate_batch(fld, s[None])[0] for s in starts])
    np.testing.assert_allclose(batch, alone, rtol=1e-12, atol=1e-12)


def test_empirical_flow_stays_bounded():
    data = Dataset(np.random.default_rng(2).uniform(-1, 1, (50, 2)))
    fld = EmpiricalField(data, PathSchedule(0.1))
    z = np.random.default_rng(3).normal(size=(512, 2))
    ends = integrate_batch(fld, z)
    a = max(np.abs(z).max(), 1.0) + 1e-9
    assert np.all(np.isfinite(ends))
    assert np.all(np.abs(ends) < a)


def test_pointwise_adapter():
    fld = pointwise(lambda t, x: -x * t)
    end = integrate(fld, [2.0], OdeConfig(atol=1e-10, rtol=1e-10)).endpoint
    assert end[0] == pytest.approx(2.0 * np.exp(-0.5), abs=1e-8)


def test_step_budget_exceeded():
    with pytest.raises(NonConvergenceError) as info:
        integrate(lambda t, x: 50 * np.sin(40 * x + 30 * t), [0.3], OdeConfig(max_steps=3))
    assert info.value.indices == [0]
    assert info.value.trajectory is not None
    assert info.value.trajectory.times[0] == 0.0


def test_non_finite_field_reports_rows():
    def blow(t, x):
        out = x.copy()
        out[x[:, 0] > 0] = np.nan
        return out

    with pytest.raises(EvaluationError) as info:
        integrate_batch(blow, [[-1.0], [1.0], [-2.0]])
    assert info.value.indices == [1]


def test_config_validation():
    with pytest.raises(InputError):
        OdeConfig(method="euler")
    with pytest.raises(InputError):
        OdeConfig(atol=0.0)
    with pytest.raises(InputError):
        integrate_batch(linear, np.zeros(3))
