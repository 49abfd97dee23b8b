import pytest
from hypothesis import assume, given, settings

from strategies import populations
from stratexp.comparison import (
    Branch,
    Decision,
    compare_all,
    compare_family_vs_plain,
    moments_ab,
    verify_mk_dominance,
)
from stratexp.errors import ConsistencyError
from stratexp.stats import StratumSummary, summarize_frame, summarize_population
from stratexp.theory import (
    covariance_yx,
    dispersion_x,
    mse_exponential,
    mse_mk_min,
    population_ratio,
    variance_stratified_mean,
)
from stratexp.transforms import IDENTITY, NAMED_FAMILIES, TransformFamily, ratio_and_theta

FAMILIES = [TransformFamily.named(name) for name in NAMED_FAMILIES]


def test_moments_ab(table_population, tiny_frame):
    A, B = moments_ab(table_population)
    assert A == covariance_yx(table_population)
    assert B == dispersion_x(table_population)
    assert A > 0 and B > 0
    assert moments_ab(summarize_frame(tiny_frame)) == (0.0, 0.0)


def test_table_sd_plain_better(table_population):
    verdict = compare_family_vs_plain(table_population, TransformFamily.named("sd"))
    assert verdict.family == "SD"
    assert verdict.branch is Branch.SAME_SIGN_NEGATIVE
    assert verdict.B < verdict.threshold
    assert verdict.decision is Decision.PLAIN_BETTER


def test_compare_all_order(table_population):
    verdicts = compare_all(table_population)
    assert [v.family for v in verdicts] == ["SD", "SK", "US1", "US2", "GNS1", "GNS2"]


def test_zero_shift_family_ties(table_population):
    family = TransformFamily.custom({sid: (1.0, 0.0) for sid in table_population.stratum_ids})
    verdict = compare_family_vs_plain(table_population, family)
    assert verdict.branch is Branch.EQUAL
    assert verdict.decision is Decision.TIE


def test_large_shift_family_wins_without_correlation():
    # rho = 0: A = 0 and any shrinking of R helps
    pop = summarize_population([
        StratumSummary.from_moments("1", 100, 10, 50.0, 20.0, 10.0, 5.0, rho=0.0),
        StratumSummary.from_moments("2", 200, 20, 80.0, 30.0, 12.0, 6.0, rho=0.0),
    ])
    family = TransformFamily.custom({"1": (1.0, 500.0), "2": (1.0, 500.0)})
    verdict = compare_family_vs_plain(pop, family)
    assert verdict.decision is Decision.FAMILY_BETTER
    assert mse_exponential(pop, family, 1.0) < mse_exponential(pop, IDENTITY, 1.0)


def test_dominance_on_table(table_population):
    gap = verify_mk_dominance(table_population, IDENTITY)
    assert gap > 0
    assert gap == pytest.approx(
        mse_exponential(table_population, IDENTITY, 1.0) - mse_mk_min(table_population), rel=1e-12)


def test_dominance_vanishes_when_alpha_one_is_optimal():
    # single stratum with rho = R S_x / (2 S_y): alpha_opt = 1
    pop = summarize_population([
        StratumSummary.from_moments("1", 100, 10, mean_x=10.0, mean_y=20.0, sd_x=1.0, sd_y=4.0, rho=0.25),
    ])
    assert population_ratio(pop) == pytest.approx(2.0)
    gap = verify_mk_dominance(pop, IDENTITY)
    assert gap == pytest.approx(0.0, abs=1e-9 * variance_stratified_mean(pop))


def test_dominance_without_dispersion(tiny_frame):
    pop = summarize_frame(tiny_frame)
    assert verify_mk_dominance(pop, IDENTITY) == 0.0


def test_dominance_identity_failure_is_reported(monkeypatch, table_population):
    monkeypatch.setattr("stratexp.comparison.mse_mk_min", lambda pop: 0.0)
    with pytest.raises(ConsistencyError):
        verify_mk_dominance(table_population, IDENTITY)


@settings(max_examples=1000, deadline=None)
@given(populations())
def test_dominance_matches_closed_form(pop):
    A, B = moments_ab(pop)
    scale = variance_stratified_mean(pop)
    for family in [IDENTITY] + FAMILIES:
        gap = verify_mk_dominance(pop, family)
        ratio = ratio_and_theta(pop, family).ratio
        assert gap >= -1e-9 * scale
        assert gap == pytest.approx((A - ratio * B / 2) ** 2 / B, rel=1e-9, abs=1e-9 * scale)


@settings(max_examples=500, deadline=None)
@given(populations())
def test_verdict_agrees_with_direct_comparison(pop):
    plain = mse_exponential(pop, IDENTITY, 1.0)
    for family in FAMILIES:
        transformed = mse_exponential(pop, family, 1.0)
        assume(abs(transformed - plain) > 1e-9 * max(abs(plain), variance_stratified_mean(pop)))
        verdict = compare_family_vs_plain(pop, family)
        expected = Decision.FAMILY_BETTER if transformed < plain else Decision.PLAIN_BETTER
        assert verdict.decision is expected
