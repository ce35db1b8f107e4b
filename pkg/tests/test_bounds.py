import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tokenbalance.balancer import run_continuous
from tokenbalance.bounds import (
    REGISTRY,
    BoundDomainError,
    cycle_l2_lower,
    cycle_tail_bound,
    evaluate,
    expander_l2_lower,
    lambda_disc_bound,
    main1_failure_probability,
    main1_lower_threshold,
    main1_upper_threshold,
    markov_tstep_bound,
    torus_l2_lower,
    universal_disc_bound,
    worstcase_disc_lower,
)
from tokenbalance.markov import second_eigenvalue, step_columns, tstep_matrix
from tokenbalance.topology import TopologyKind, TopologySpec, node_distance

from conftest import sched

SQRT48_LOG4096 = math.sqrt(48 * math.log(4096))


def test_markov_tstep_examples():
    assert markov_tstep_bound(0.25, 0.25, 1, 1, 2**20) == pytest.approx(0.03125, rel=1e-12)
    assert markov_tstep_bound(0.25, 0.25, 1, 1, 64) == pytest.approx(4, rel=1e-12)
    assert markov_tstep_bound(1, 1, 0.5, 0.5, 1) == pytest.approx(2, rel=1e-12)


def test_markov_tstep_pi_ratio_scaling():
    base = markov_tstep_bound(0.3, 0.4, 1, 1, 10)
    assert markov_tstep_bound(0.3, 0.4, 0.4, 0.1, 10) == pytest.approx(8 * base)


@pytest.mark.parametrize(
    "args", [(0, 0.5, 1, 1, 1), (0.5, 1.5, 1, 1, 1), (0.5, 0.5, 1, 1, 0.5), (0.5, 0.5, 0.1, 0.2, 1)]
)
def test_markov_tstep_domain(args):
    with pytest.raises(BoundDomainError):
        markov_tstep_bound(*args)


def test_main1_upper_examples():
    assert main1_upper_threshold(3, 2, 50, 4096, 0) == pytest.approx(19.981, abs=1e-3)
    expect = math.sqrt(128) * 32 * math.log(4096) * 0.05 + SQRT48_LOG4096
    assert main1_upper_threshold(1, 1, 32, 4096, 0.05) == pytest.approx(expect, rel=1e-12)
    assert main1_upper_threshold(1, 1, 32, 4096, 0.05) == pytest.approx(170.55, abs=0.02)
    p = main1_failure_probability(math.sqrt(3 * math.log(4096)), 4096)
    assert p == pytest.approx(2 * 4096.0**-3 + 2 * 4096.0**-2, rel=1e-12)
    assert p == pytest.approx(1.192e-7, rel=1e-3)


def test_main1_lower_examples():
    assert main1_lower_threshold(1024, 4096, 0.5) == pytest.approx(37.26, abs=0.01)
    assert main1_lower_threshold(1024, 4096, 1e-6) == 0
    assert main1_lower_threshold(2, 4096, 1) == 0
    with pytest.raises(BoundDomainError):
        main1_lower_threshold(1, 4096, 1)


def test_asymptotic_examples():
    assert universal_disc_bound(16, 1, math.e) == pytest.approx(1.5, rel=1e-12)
    assert lambda_disc_bound(0, 1, 100, 4096) == pytest.approx(math.sqrt(math.log(4096)))
    assert lambda_disc_bound(0.5, 8, 4, math.e) == pytest.approx(2, rel=1e-12)
    assert universal_disc_bound(16, 1, math.e, c=3) == pytest.approx(2.5, rel=1e-12)
    with pytest.raises(BoundDomainError):
        lambda_disc_bound(1, 4, 1, 16)
    assert evaluate("universal_disc_bound", t=16, sigma=1, n=16).caveat.startswith("asymptotic")


def test_cycle_tail_examples():
    assert cycle_tail_bound(18, 32) == pytest.approx(2 / math.e, rel=1e-12)
    t = 50
    assert cycle_tail_bound(2 + math.sqrt(8 * t * math.log(2)), t) == pytest.approx(1, rel=1e-12)
    # e^-312.5 is tiny but still a normal double
    assert cycle_tail_bound(102, 4) < 1e-130
    assert cycle_tail_bound(2000, 1) == 0
    with pytest.raises(BoundDomainError):
        cycle_tail_bound(2, 10)


def test_l2_lower_examples():
    assert cycle_l2_lower(100) == pytest.approx(6.25e-4, rel=1e-12)
    assert cycle_l2_lower(10000) == pytest.approx(6.25e-5, rel=1e-12)
    assert cycle_l2_lower(400) == pytest.approx(cycle_l2_lower(100) / 2, rel=1e-12)
    assert torus_l2_lower(100, 1) == cycle_l2_lower(100)
    assert torus_l2_lower(100, 2) == pytest.approx(3.90625e-7, rel=1e-12)
    assert expander_l2_lower(10, 2) == 2.0**-20
    with pytest.raises(BoundDomainError):
        cycle_l2_lower(9)
    with pytest.raises(BoundDomainError):
        cycle_l2_lower(10000, n=1024)
    with pytest.raises(BoundDomainError):
        expander_l2_lower(31, 2)


def test_worstcase_lower_examples():
    assert worstcase_disc_lower("cycle", 2**24, 4096, 2**18) == pytest.approx(64_500, rel=2e-3)
    assert worstcase_disc_lower("cycle", 64, 4096, 10**15) == 0
    assert worstcase_disc_lower("torus2d", 2**10, 2**16, 2**5) == pytest.approx(57.8, abs=0.1)
    with pytest.raises(BoundDomainError):
        worstcase_disc_lower("hypercube", 64, 4096, 1)


@given(st.floats(1, 1e9), st.floats(1, 1e9))
def test_monotone_in_t(t1, t2):
    lo, hi = sorted((t1, t2))
    assert markov_tstep_bound(0.25, 0.25, 1, 1, hi) <= markov_tstep_bound(0.25, 0.25, 1, 1, lo)
    assert universal_disc_bound(hi, 10, 4096) <= universal_disc_bound(lo, 10, 4096)
    assert lambda_disc_bound(0.9, hi, 10, 4096) <= lambda_disc_bound(0.9, lo, 10, 4096)
    assert worstcase_disc_lower("cycle", 2**20, 4096, hi) <= worstcase_disc_lower("cycle", 2**20, 4096, lo)
    assert cycle_tail_bound(20, hi) >= cycle_tail_bound(20, lo)


def test_dominance_markov_bound_cycle64():
    n = 64
    s = sched("cycle", n)
    cols = np.eye(n)
    worst_ratio = 0.0
    for t in range(1, 4097):
        step_columns(s, cols, 1)
        gap = np.abs(cols - 1 / n).max()
        worst_ratio = max(worst_ratio, gap / markov_tstep_bound(0.25, 0.25, 1 / n, 1 / n, t))
    assert worst_ratio <= 1


@pytest.mark.parametrize("kind,kw", [("cycle", {}), ("expander", {"d_exp": 8, "seed": 1})])
def test_dominance_lambda_bound(kind, kw):
    s = sched(kind, 64, **kw)
    lam = second_eigenvalue(s)
    for t in range(1, 65):
        gap = np.abs(tstep_matrix(s, t) - 1 / 64).max()
        assert gap <= lam ** (t / 2) + 1e-12


def cycle_exact_columns(n, t):
    return tstep_matrix(sched("cycle", n), t, columns=[0])[:, 0]


def test_cycle_l2_lower_below_measured():
    n = 1024
    for t in (16, 64, 256, 1024):
        col = cycle_exact_columns(n, t)
        assert np.sum((col - 1 / n) ** 2) >= cycle_l2_lower(t)


def test_cycle_tail_bound_dominates_measured():
    n = 1024
    topo = TopologySpec(TopologyKind.CYCLE, n)
    dist = np.array([node_distance(topo, 0, v) for v in range(n)])
    s = sched("cycle", n)
    for t in (16, 64, 256):
        row = run_continuous(s, np.eye(n)[0], t)
        for delta in (18, 34, 66):
            assert row[dist >= delta].sum() <= cycle_tail_bound(delta, t)


def test_registry_and_evaluate():
    assert set(REGISTRY) >= {
        "markov_tstep_bound", "main1_upper_threshold", "main1_lower_threshold", "universal_disc_bound",
        "lambda_disc_bound", "cycle_tail_bound", "cycle_l2_lower", "torus_l2_lower", "expander_l2_lower",
        "worstcase_disc_lower",
    }
    rep = evaluate("cycle_l2_lower", t=100)
    assert rep.value == pytest.approx(6.25e-4) and rep.side == "lower" and rep.inputs == {"t": 100}
    assert rep.to_dict()["name"] == "cycle_l2_lower"
    with pytest.raises(KeyError):
        evaluate("nope")
    with pytest.raises(BoundDomainError):
        evaluate("cycle_l2_lower", t=100, bogus=1)
