import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import kstest, norm

from kernelfm import (
    Dataset,
    EmpiricalField,
    InputError,
    KdeModel,
    KernelSpec,
    PathSchedule,
    bandwidth_rule,
    emp_density,
    kde_density,
    kde_sample,
)


def test_single_anchor_at_origin_gives_kernel_draws():
    s = kde_sample(KdeModel(Dataset([[0.0, 0.0]]), 1.0), 100_000, seed=0)
    assert np.all(np.abs(s.mean(axis=0)) <= 0.02)


def test_tiny_bandwidth_collapses_on_anchors():
    pts = np.random.default_rng(1).normal(size=(10, 2))
    s = kde_sample(KdeModel(Dataset(pts), 1e-8), 500, seed=2)
    dist = np.min(np.linalg.norm(s[:, None] - pts[None], axis=2), axis=1)
    assert np.all(dist <= 1e-6)


def test_symmetric_pair_balanced():
    s = kde_sample(KdeModel(Dataset([[-1.0], [1.0]]), 0.1), 100_000, seed=3)
    assert np.mean(s > 0) == pytest.approx(0.5, abs=0.01)


def test_mean_converges_to_anchor_mean():
    pts = np.random.default_rng(4).uniform(-1, 1, (7, 2))
    s = kde_sample(KdeModel(Dataset(pts), 0.3), 50_000, seed=5)
    tol = 5 * s.std(axis=0) / np.sqrt(len(s))
    assert np.all(np.abs(s.mean(axis=0) - pts.mean(axis=0)) <= tol)


def test_density_equals_flow_path_at_end():
    pts = np.random.default_rng(6).uniform(-1, 1, (25, 2))
    x = np.random.default_rng(7).normal(size=(40, 2))
    kde = kde_density(KdeModel(Dataset(pts), 0.2), x)
    emp = emp_density(EmpiricalField(Dataset(pts), PathSchedule(0.2)), 1.0, x)
    np.testing.assert_allclose(kde, emp, rtol=1e-12)


def test_density_by_substitution():
    assert kde_density(KdeModel(Dataset([[0.0]]), 0.5), [0.0]) == pytest.approx(2 / np.sqrt(2 * np.pi), abs=1e-5)


def test_density_direct_sum():
    pts = np.array([[-0.5], [0.2], [0.9]])
    x = np.array([[0.1], [1.3]])
    h = 0.3
    direct = np.mean(norm.pdf((x - pts.T) / h), axis=1) / h
    np.testing.assert_allclose(kde_density(KdeModel(Dataset(pts), h), x), direct, rtol=1e-13)


@pytest.mark.parametrize("kind", ["gaussian", "uniform_product"])
def test_mass_one(kind):
    pts = np.random.default_rng(8).uniform(-1, 1, (5, 2))
    m = KdeModel(Dataset(pts), 0.25, KernelSpec(kind, 2))
    g = np.linspace(-3.5, 3.5, 1401)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    vals = kde_density(m, np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
    tol = 1e-4 if kind == "gaussian" else 1e-2  # jump discontinuities cost O(grid step)
    assert trapezoid(trapezoid(vals, g, axis=1), g) == pytest.approx(1.0, abs=tol)


def test_uniform_kernel_mass_one_in_one_dimension():
    # support edges fall on cell boundaries, so the midpoint rule is exact
    m = KdeModel(Dataset([[0.0], [0.5]]), 0.25, KernelSpec("uniform_product", 1))
    edges = np.linspace(-2, 2, 16_001)
    mids = 0.5 * (edges[1:] + edges[:-1])
    assert np.sum(kde_density(m, mids[:, None])) * (edges[1] - edges[0]) == pytest.approx(1.0, abs=1e-12)


def test_stratified_draws_have_kde_law():
    pts = np.random.default_rng(9).uniform(-1, 1, (50, 1))
    m = KdeModel(Dataset(pts), 0.2)

    def cdf(x):
        return np.mean(norm.cdf((np.asarray(x)[:, None] - pts[:, 0]) / 0.2), axis=1)

    s = m.sample_stratified(4096, seed=10)[:, 0]
    assert kstest(s, cdf).pvalue > 1e-3


def test_stratified_draws_are_marginally_correct_over_seeds():
    # single draw of a stratified design: average its position over seeds
    pts = np.array([[-1.0, 0.0], [1.0, 0.5]])
    m = KdeModel(Dataset(pts), 0.3)
    means = np.array([m.sample_stratified(16, seed=s).mean(axis=0) for s in range(400)])
    np.testing.assert_allclose(means.mean(axis=0), pts.mean(axis=0), atol=0.02)


def test_bandwidth_validation():
    with pytest.raises(InputError):
        KdeModel(Dataset([[0.0]]), 0.0)
    with pytest.raises(InputError):
        KdeModel(Dataset([[0.0]]), 1.5)
    with pytest.raises(InputError):
        kde_sample(KdeModel(Dataset([[0.0]]), 0.5), 0)


class TestBandwidthRule:
    def test_two_dimensional(self):
        assert bandwidth_rule(256, 1.0, 2) == pytest.approx(0.25)

    def test_one_sample(self):
        for a, d in [(1.0, 1), (0.5, 3)]:
            assert bandwidth_rule(1, a, d) == 1.0

    def test_manifold_dimension(self):
        assert bandwidth_rule(256, 1.0, 1) == pytest.approx(0.15749, abs=1e-5)

    def test_log_correction(self):
        n = 1000
        assert bandwidth_rule(n, 1.0, 2, log_correction=True) == pytest.approx((n / np.log(n) ** 2) ** -0.25)
        assert bandwidth_rule(3, 1.0, 2, log_correction=True) == pytest.approx((3 / np.log(3) ** 2) ** -0.25)
        with pytest.raises(InputError):
            bandwidth_rule(2, 1.0, 2, log_correction=True)

    def test_invalid(self):
        with pytest.raises(InputError):
            bandwidth_rule(0)
        with pytest.raises(InputError):
            bandwidth_rule(10, alpha=1.5)
