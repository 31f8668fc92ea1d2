import numpy as np
import pytest

from slgp.density import build_grid
from slgp.kernels import DomainSpec, KernelSpec
from slgp.metrics import MetricKind
from slgp.rates import (RateExperiment, default_offsets, fit_rate_slope, rate_result,
                        simulate_distances, simulate_mean_power, theoretical_rate)

GAUSS = KernelSpec.squared_exponential(1.0, [1.0, 1.0])
EXPO = KernelSpec.matern(0.5, 1.0, [1.0, 1.0])


@pytest.fixture(scope="module")
def grid():
    return build_grid(DomainSpec.unit(1, 1), 201)


def test_theoretical_rate_examples():
    assert theoretical_rate("hellinger", 1, 2) == 1
    assert theoretical_rate("kl", 1, 1) == 1
    assert theoretical_rate("tv", 2, 2) == 4
    assert theoretical_rate(MetricKind.HELLINGER, 2, GAUSS.holder_alpha1) == 2
    with pytest.raises(ValueError):
        theoretical_rate("suplog", 1, 2)
    with pytest.raises(ValueError):
        theoretical_rate("kl", 0, 2)


def test_fit_slope_exact_power_laws():
    h = np.geomspace(0.01, 0.1, 8)
    assert fit_rate_slope((h, 3.0 * h**2)) == pytest.approx(2.0, abs=1e-10)
    assert fit_rate_slope((h, 0.7 * h**0.5)) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        fit_rate_slope((h[:3], h[:3]))
    with pytest.raises(ValueError):
        fit_rate_slope((h, np.r_[0.0, h[1:]]))


def test_experiment_validation():
    with pytest.raises(ValueError):
        RateExperiment(GAUSS, metric="suplog")
    with pytest.raises(ValueError):
        RateExperiment(GAUSS, n_reps=50)
    with pytest.raises(ValueError):
        RateExperiment(GAUSS, offsets=[0.1, 0.05])
    exp = RateExperiment(GAUSS, offsets=[0.1, 0.6], n_reps=100)
    with pytest.raises(ValueError, match="outside"):
        simulate_mean_power(exp)
    np.testing.assert_allclose(default_offsets()[[0, -1]], [0.005, 0.3])


def test_zero_offset_gives_zero(grid):
    d = simulate_distances(GAUSS, [0.0, 0.05], grid, n_reps=20, p=64, seed=1)
    for m in d:
        assert np.all(d[m][:, 0] == 0.0)
        assert np.all(d[m][:, 1] > 0)


def test_deterministic(grid):
    a = simulate_distances(EXPO, [0.01, 0.1], grid, n_reps=10, p=32, seed=4)
    b = simulate_distances(EXPO, [0.01, 0.1], grid, n_reps=10, p=32, seed=4)
    assert all(np.array_equal(a[m], b[m]) for m in a)


def test_hellinger_monotone_small_lags(grid):
    offsets = np.linspace(0.025, 0.2, 8)
    runs = [rate_result(simulate_distances(GAUSS, offsets, grid, 300, 512, s,
                                           metrics=("hellinger",))["hellinger"],
                        offsets, "hellinger", 1, 2) for s in range(3)]
    est = np.mean([r.estimates for r in runs], axis=0)
    se = np.sqrt(np.sum([r.stderr**2 for r in runs], axis=0)) / 3
    drops = np.flatnonzero(np.diff(est) < 0)
    assert len(drops) <= 1
    for k in drops:
        assert est[k] - est[k + 1] <= 2 * max(se[k], se[k + 1])


def test_stderr_shrinks_with_reps(grid):
    offsets = [0.05]
    dist = simulate_distances(GAUSS, offsets, grid, 1000, 256, 7, metrics=("hellinger",))["hellinger"]
    se_small = rate_result(dist[:250], offsets, "hellinger", 1, 2).stderr[0]
    se_big = rate_result(dist, offsets, "hellinger", 1, 2).stderr[0]
    assert 1.6 <= se_small / se_big <= 2.4


def test_kernel_ordering_every_seed(grid):
    offsets = default_offsets()
    for seed in range(3):
        slopes = [simulate_mean_power(RateExperiment(k, "hellinger", 1, offsets, 200, 256, seed), grid).slope
                  for k in (GAUSS, EXPO)]
        assert slopes[0] > slopes[1]


def test_result_serializes(grid):
    res = simulate_mean_power(RateExperiment(EXPO, "kl", 1, default_offsets(), 100, 64, 0), grid)
    d = res.to_dict()
    assert d["metric"] == "kl" and d["theoretical_exponent"] == 1
    assert np.isfinite(d["slope"]) and len(d["estimates"]) == len(d["offsets"])
