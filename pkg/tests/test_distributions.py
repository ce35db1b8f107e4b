import math

import numpy as np
import pytest

from tokenbalance.balancer import discrepancy
from tokenbalance.distributions import (
    DistributionSpec,
    concentration_report,
    moments,
    parse_distribution,
    sample_vector,
)

FAMILIES = [
    DistributionSpec.uniform(64),
    DistributionSpec.binomial(400, 0.3),
    DistributionSpec.geometric(0.25),
    DistributionSpec.poisson(9),
    DistributionSpec.poisson(50),
]


def test_moments_examples():
    assert moments(DistributionSpec.geometric(0.5)) == pytest.approx((2, math.sqrt(2)))
    mu, sigma = moments(DistributionSpec.uniform(64))
    assert mu == 64 and sigma == pytest.approx(37.2380, abs=1e-4)
    assert moments(DistributionSpec.poisson(9)) == (9, 3)
    assert moments(DistributionSpec.binomial(100, 0.5)) == (50, 5)


def test_uniform_variance_by_enumeration():
    K = 7
    support = np.arange(2 * K + 1)
    assert moments(DistributionSpec.uniform(K))[1] ** 2 == pytest.approx(support.var())


def test_uniform_k0_is_all_zero():
    assert not sample_vector(DistributionSpec.uniform(0), 100, 1).any()


def test_sampling_is_deterministic():
    for spec in FAMILIES:
        a = sample_vector(spec, 1000, 42)
        assert a.dtype == np.int64
        assert np.array_equal(a, sample_vector(spec, 1000, 42))
        assert not np.array_equal(a, sample_vector(spec, 1000, 43))


def test_uniform_sample_mean_clt():
    x = sample_vector(DistributionSpec.uniform(64), 10**6, 7)
    assert abs(x.mean() - 64) <= 0.2
    assert x.min() == 0 and x.max() == 128


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_sample_moments_within_five_standard_errors(spec):
    n = 200_000
    x = sample_vector(spec, n, 3).astype(float)
    mu, sigma = moments(spec)
    assert abs(x.mean() - mu) <= 5 * sigma / math.sqrt(n)
    # variance of the sample variance is (m4 - sigma^4)/n; use a generous kurtosis bound
    assert abs(x.var() - sigma**2) <= 5 * sigma**2 * math.sqrt(10 / n)


def test_geometric_support_starts_at_one():
    x = sample_vector(DistributionSpec.geometric(0.5), 10_000, 0)
    assert x.min() == 1


def test_invalid_specs():
    with pytest.raises(ValueError):
        DistributionSpec.binomial(10, 0.7)
    with pytest.raises(ValueError):
        DistributionSpec.geometric(0)
    with pytest.raises(ValueError):
        DistributionSpec.poisson(-1)
    with pytest.raises(ValueError):
        DistributionSpec("normal")


def test_parse_distribution_roundtrip():
    for spec in FAMILIES:
        assert parse_distribution(str(spec)) == spec
    with pytest.raises(ValueError):
        parse_distribution("uniform:x")
    with pytest.raises(ValueError):
        parse_distribution("binomial:5")


def geometric_tail_oracle(p, threshold):
    # P[X >= threshold] for X on {1, 2, ...}, summing the pmf
    return 1 - sum(p * (1 - p) ** (k - 1) for k in range(1, threshold))


def test_geometric_tail_at_delta_two():
    exact = geometric_tail_oracle(0.5, 5)
    assert exact == pytest.approx(0.0625, abs=1e-15)
    rep = concentration_report(DistributionSpec.geometric(0.5), [0, 1, 2, 3], 100_000, 5)
    i = list(rep.deltas).index(2)
    se = math.sqrt(exact * (1 - exact) / rep.samples)
    assert abs(rep.tails[i] - exact) <= 4 * se


def test_uniform_tail_vanishes_beyond_sqrt3():
    rep = concentration_report(DistributionSpec.uniform(32), [0, 1.0, 1.8, 2.5], 50_000, 1)
    assert rep.tails[0] == 1.0
    assert rep.tails[2] == 0 and rep.tails[3] == 0


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_tails_decay_exponentially(spec):
    rep = concentration_report(spec, np.linspace(0, 6, 25), 100_000, 11)
    assert rep.tails[0] == 1.0
    assert np.all(np.diff(rep.tails) <= 0)
    assert rep.kappa_hat > 0


def test_report_requires_enough_samples():
    with pytest.raises(ValueError):
        concentration_report(DistributionSpec.poisson(4), [1], 100, 0)


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_initial_discrepancy_is_order_sigma_log_n(spec):
    n = 4096
    _, sigma = moments(spec)
    kappa = concentration_report(spec, np.linspace(0, 6, 25), 100_000, 2).kappa_hat
    limit = 16 / kappa * sigma * math.log(n)
    hits = sum(discrepancy(sample_vector(spec, n, seed)) <= limit for seed in range(100))
    assert hits >= 99
