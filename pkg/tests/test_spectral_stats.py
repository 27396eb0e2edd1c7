import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tensor_spectra import spectral_stats as ss
from tensor_spectra.ensembles import EnsembleSpec
from tensor_spectra.errors import InvalidArgumentError


def test_cpe_histogram_is_exponential():
    spec = EnsembleSpec("cpe", 64, samples=2**12, seed=1)
    h = ss.spacing_histogram(spec, bins=40, s_max=4.0)
    target = np.exp(-h.centers)
    # the bin average of e^{-s} differs from its centre value by ~w^2/24
    avg = (np.exp(-h.edges[:-1]) - np.exp(-h.edges[1:])) / h.widths
    assert np.all(np.abs(h.values - avg) <= 4 * h.stderr)
    assert np.max(np.abs(avg - target)) < 1e-3


def test_tensor_n2_first_bin_deviates():
    spec = EnsembleSpec("cue-tensor-cue", 2, samples=2**12, seed=1)
    h = ss.spacing_histogram(spec)
    assert abs(h.values[0] - math.exp(-h.centers[0])) > 4 * h.stderr[0]


def test_single_point_histogram():
    h = ss.spacing_histogram(EnsembleSpec("cue", 1, samples=5), bins=4, s_max=4.0)
    # the lone spacing is exactly 1 and lands in [1, 2)
    assert h.counts.tolist() == [0, 5, 0, 0]
    assert h.values[1] == pytest.approx(1.0)


def test_histogram_mass_includes_overflow():
    spec = EnsembleSpec("cpe", 10, samples=300, seed=2)
    h = ss.spacing_histogram(spec, bins=8, s_max=1.5)
    assert h.total == 3000
    assert h.counts.sum() + h.overflow == h.total and h.overflow > 0


def test_histogram_argument_checks():
    with pytest.raises(InvalidArgumentError):
        ss.histogram_from_values(np.ones(3), bins=0)
    with pytest.raises(InvalidArgumentError):
        ss.histogram_from_values(np.ones(3), s_max=0.0)


def test_ks_single_value():
    assert ss.ks_exponential([math.log(2)]) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("n", [1, 7, 100, 1000])
def test_ks_quantile_grid(n):
    i = np.arange(1, n + 1)
    v = -np.log1p(-(i - 0.5) / n)
    assert ss.ks_exponential(v) == pytest.approx(1 / (2 * n), rel=1e-9)


def test_ks_on_exponential_draws():
    v = np.random.default_rng(3).exponential(size=100_000)
    assert ss.ks_exponential(v) < 0.01


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 20.0, allow_nan=False), min_size=1, max_size=60))
def test_ks_matches_scipy_and_permutation(values):
    v = np.array(values)
    ref = stats.kstest(v, "expon").statistic
    assert ss.ks_exponential(v) == pytest.approx(ref, abs=1e-12)
    assert ss.ks_exponential(v[::-1]) == ss.ks_exponential(v)


def test_ks_empty():
    with pytest.raises(InvalidArgumentError):
        ss.ks_exponential([])


def test_empirical_cdf():
    f = ss.EmpiricalCDF([3.0, 1.0, 2.0, 2.0])
    assert f.n == 4
    assert f(2.0) == 0.75 and f(0.5) == 0.0 and f(3.0) == 1.0
    with pytest.raises(InvalidArgumentError):
        ss.EmpiricalCDF([])


def test_void_curve_zero_and_monotone():
    spec = EnsembleSpec("cue-tensor-cue", 3, samples=2000, seed=5)
    c = ss.void_curve(spec, np.linspace(0, 3, 31))
    assert c.estimate[0] == 1.0
    assert np.all(np.diff(c.estimate) <= 0)
    assert c.stderr[0] == 1 / 2000
    inner = (c.estimate > 0) & (c.estimate < 1)
    assert np.allclose(c.stderr[inner], np.sqrt(c.estimate * (1 - c.estimate) / 2000)[inner])


def test_void_curve_cpe_is_exponential():
    spec = EnsembleSpec("cpe", 200, samples=20_000, seed=6)
    c = ss.void_curve(spec, [0.5, 1.0, 2.0])
    # CPE(N) void on the unit-density scale is (1 - s/N)^N
    exact = (1 - c.s / 200) ** 200
    assert np.all(np.abs(c.estimate - exact) <= 3 * c.stderr + 1e-12)


def test_void_curve_grid_checks():
    spec = EnsembleSpec("cue", 2, samples=4)
    with pytest.raises(InvalidArgumentError):
        ss.void_curve(spec, [1.0, 0.5])
    with pytest.raises(InvalidArgumentError):
        ss.void_curve(spec, [-0.1, 0.5])


def test_void_counts_closed_window():
    first = np.array([0.5, 1.0, 2.0])
    # a point sitting exactly at s is inside [0, s]
    assert ss.void_counts(first, np.array([0.0, 1.0, 1.5])).tolist() == [3, 1, 1]


def test_binomial_stderr_edges():
    se = ss.binomial_stderr(np.array([0.0, 0.5, 1.0]), 100)
    assert se.tolist() == [0.01, 0.05, 0.01]


def _curve(s, e):
    s = np.asarray(s, float)
    return ss.VoidCurve(s, np.asarray(e, float), np.zeros_like(s), 1)


def test_second_difference_of_exponential():
    s = np.round(np.arange(0, 2.01, 0.1), 12)
    d = ss.second_difference_density(_curve(s, np.exp(-s)))
    p = dict((round(a, 6), b) for a, b in d)
    expected = math.exp(-1) * (2 * math.cosh(0.1) - 2) / 0.01
    assert p[1.0] == pytest.approx(expected, rel=1e-9)
    assert expected / math.exp(-1) == pytest.approx(1.000834, abs=1e-6)


def test_second_difference_affine_is_zero():
    s = np.arange(0, 11) * 0.25
    d = ss.second_difference_density(_curve(s, 1 - s))
    assert np.all(d.density == 0.0)


def test_second_difference_grid_checks():
    with pytest.raises(InvalidArgumentError):
        ss.second_difference_density(_curve([0, 0.1, 0.3], [1, 0.9, 0.7]))
    with pytest.raises(InvalidArgumentError):
        ss.second_difference_density(_curve([0, 0.1], [1, 0.9]))


def test_second_difference_propagated_error():
    s = np.array([0.0, 0.5, 1.0])
    c = ss.VoidCurve(s, np.array([1.0, 0.6, 0.3]), np.array([0.01, 0.02, 0.03]), 1)
    d = ss.second_difference_density(c)
    assert d.stderr[0] == pytest.approx(math.sqrt(1e-4 + 4 * 4e-4 + 9e-4) / 0.25)


def test_pair_correlation_cpe_is_one():
    spec = EnsembleSpec("cpe", 50, samples=20_000, seed=7)
    est = ss.pair_correlation_estimate(spec, 3.0, 10.0)
    # CPE(N) has rescaled two-point intensity 1 - 1/N
    assert abs(est.value - (1 - 1 / 50)) < 3 * est.stderr


def test_pair_correlation_rejects_overlap():
    spec = EnsembleSpec("cpe", 5, samples=2)
    with pytest.raises(InvalidArgumentError):
        ss.pair_correlation_estimate(spec, 1.0, 1.4)
    with pytest.raises(InvalidArgumentError):
        ss.pair_correlation_estimate(spec, 1.0, 3.0, eps=0.0)


@pytest.mark.parametrize("workers", [1, 3])
def test_estimators_worker_independent(workers):
    spec = EnsembleSpec("cue2-tensor", 3, samples=40, seed=8)
    ref = ss.pooled_spacings(spec, workers=1)
    assert ss.pooled_spacings(spec, workers=workers).tobytes() == ref.tobytes()
    c1 = ss.void_curve(spec, [0.5, 1.0], workers=1)
    c2 = ss.void_curve(spec, [0.5, 1.0], workers=workers)
    assert c1.estimate.tobytes() == c2.estimate.tobytes()
