import itertools
import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats as scipy_stats

from stratexp.errors import (
    DesignError,
    EnumerationBudgetError,
    GenerationError,
    InputError,
    SimulationError,
)
from stratexp.estimators import evaluate, parse_estimator
from stratexp.simulate import (
    BLOCK_SIZE,
    ValidationMethod,
    combination_count,
    draw_block,
    draw_srswor,
    enumerate_exact,
    generate_population,
    relative_error,
    run_replications,
    validate,
)
from stratexp.stats import (
    PopulationFrame,
    SampleData,
    SampleStratum,
    StratumSummary,
    load_aggregated,
    summarize_frame,
)
from stratexp.theory import theoretical

TOKENS = ["cr", "kc_sd", "t", "t_us2", "t_mk@1.5", "t_mk_opt"]


def _specs(tokens=TOKENS):
    return [parse_estimator(token) for token in tokens]


def _frame(rows):
    return PopulationFrame(pd.DataFrame(rows, columns=["stratum", "y", "x"]))


def _moderate_targets(rho=0.8, beta2x=3.0):
    """Strata with C_x = C_y = 0.2 and identical transform constants"""
    spec = [("1", 400, 40, 100.0, 40.0), ("2", 500, 50, 150.0, 70.0), ("3", 600, 60, 220.0, 90.0)]
    return [
        StratumSummary.from_moments(sid, N, n, mean_x=mx, mean_y=my, sd_x=0.2 * mx,
                                    sd_y=0.2 * my, rho=rho, beta2x=beta2x)
        for sid, N, n, mx, my in spec
    ]


# ============================================================================
# GENERATION
# ============================================================================

def test_generated_table_population_matches_moments(table_file):
    targets = load_aggregated(table_file).strata
    frame = generate_population(targets, seed=42)
    assert frame.size == 854
    design = {s.stratum_id: s.n_h for s in targets}
    realized = summarize_frame(frame, design)
    for target, got in zip(targets, realized.strata):
        assert got.N_h == target.N_h
        for field in ("mean_x", "mean_y", "sd_x", "sd_y", "rho"):
            assert getattr(got, field) == pytest.approx(getattr(target, field), rel=1e-6)
        assert got.cx == pytest.approx(target.sd_x / target.mean_x, rel=1e-6)


def test_generation_is_deterministic(table_file):
    targets = load_aggregated(table_file).strata
    first = generate_population(targets, seed=7).units
    pd.testing.assert_frame_equal(first, generate_population(targets, seed=7).units, check_exact=True)
    assert not first["x"].equals(generate_population(targets, seed=8).units["x"])


def test_perfect_correlation_gives_collinear_units():
    target = StratumSummary.from_moments("1", 30, 5, 10.0, 4.0, 2.0, 1.0, rho=1.0)
    frame = generate_population([target], seed=1)
    y, x = frame.stratum_values("1")
    assert np.corrcoef(x, y)[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(y, 4.0 + 0.5 * (x - 10.0))


@pytest.mark.parametrize("beta2x", [1.0, 1.8, 2.5, 3.0, 9.0])
def test_generation_handles_kurtosis_range(beta2x):
    target = StratumSummary.from_moments("1", 201, 5, 10.0, 4.0, 2.0, 1.0, rho=0.5, beta2x=beta2x)
    got = summarize_frame(generate_population([target], seed=3)).strata[0]
    assert got.sd_x == pytest.approx(2.0, rel=1e-9)
    assert got.rho == pytest.approx(0.5, rel=1e-9)


def test_generation_rejects_tiny_strata():
    target = StratumSummary.from_moments("1", 2, 1, 10.0, 4.0, 2.0, 1.0, rho=0.5)
    with pytest.raises(GenerationError, match="3"):
        generate_population([target], seed=1)
    with pytest.raises(InputError):
        generate_population([_moderate_targets()[0]], seed=-1)


# ============================================================================
# SAMPLING
# ============================================================================

def test_census_sample_equals_population_means(tiny_frame):
    pop = summarize_frame(tiny_frame)
    sample = draw_srswor(tiny_frame, {"1": 4, "2": 4}, seed=1, replication_index=12)
    assert list(sample.means_y()) == [s.mean_y for s in pop.strata]
    assert list(sample.means_x()) == [s.mean_x for s in pop.strata]


def test_draw_is_reproducible_and_matches_block(tiny_frame, tiny_design):
    index = BLOCK_SIZE + 17
    first = draw_srswor(tiny_frame, tiny_design, seed=5, replication_index=index)
    assert first == draw_srswor(tiny_frame, tiny_design, seed=5, replication_index=index)
    block = draw_block(tiny_frame, tiny_design, seed=5, block_index=1)
    assert list(first.means_y()) == list(block.means_y[17])
    assert list(first.means_x()) == list(block.means_x[17])


def test_draw_rejects_bad_designs(tiny_frame):
    with pytest.raises(DesignError):
        draw_srswor(tiny_frame, {"1": 2, "9": 2}, seed=1, replication_index=0)
    with pytest.raises(DesignError):
        draw_srswor(tiny_frame, [("1", 2), ("2", 5)], seed=1, replication_index=0)


def test_srswor_is_uniform_over_subsets():
    frame = _frame([("1", 1.0, 1.0), ("1", 2.0, 2.0), ("1", 4.0, 3.0), ("1", 8.0, 5.0)])
    reps = 60_000
    blocks = math.ceil(reps / BLOCK_SIZE)
    means = np.concatenate([
        draw_block(frame, {"1": 2}, seed=2024, block_index=b).means_y[:, 0] for b in range(blocks)
    ])[:reps]
    totals = np.rint(2 * means).astype(int)
    subset_totals = sorted(a + b for a, b in itertools.combinations([1, 2, 4, 8], 2))
    counts = [int(np.sum(totals == t)) for t in subset_totals]
    assert sum(counts) == reps
    assert scipy_stats.chisquare(counts).pvalue > 0.001


# ============================================================================
# REPLICATION
# ============================================================================

def test_report_independent_of_worker_count(tiny_frame, tiny_design):
    sequential = run_replications(tiny_frame, tiny_design, _specs(), reps=5000, seed=11, workers=1)
    parallel = run_replications(tiny_frame, tiny_design, _specs(), reps=5000, seed=11, workers=3)
    assert sequential == parallel
    assert [r.estimator for r in sequential.rows] == [s.name for s in _specs()]


def test_report_columns(tiny_frame, tiny_design):
    report = run_replications(tiny_frame, tiny_design, _specs(["t"]), reps=3000, seed=3)
    row = report.row("t")
    pop = summarize_frame(tiny_frame, tiny_design)
    assert report.true_mean == pop.grand_mean_y
    assert row.replications == 3000 and row.seed == 3
    assert row.empirical_bias == pytest.approx(row.empirical_mean - pop.grand_mean_y)
    assert row.empirical_mse >= row.empirical_bias ** 2
    assert (row.theoretical_bias, row.theoretical_mse) == theoretical(parse_estimator("t"), pop)
    assert row.mse_se > 0


def test_census_design_has_no_error(tiny_frame):
    report = run_replications(tiny_frame, {"1": 4, "2": 4}, _specs(["cr", "t", "t_mk_opt"]),
                              reps=100, seed=1)
    for row in report.rows:
        assert row.empirical_mse == pytest.approx(0.0, abs=1e-18)
        assert row.theoretical_mse == 0


def test_optimal_alpha_beats_alpha_one_on_same_samples():
    frame = generate_population(_moderate_targets(rho=0.9), seed=5)
    design = {"1": 20, "2": 25, "3": 30}
    report = run_replications(frame, design, _specs(["t", "t_mk_opt"]), reps=20_000, seed=9)
    assert report.row("t_MK(opt)").empirical_mse < report.row("t").empirical_mse


def test_undefined_estimate_reports_replication():
    frame = _frame([("1", 1.0, -1.0), ("1", 2.0, 1.0), ("1", 3.0, -2.0), ("1", 4.0, 3.0)])
    design = {"1": 2}
    expected = next(r for r in range(BLOCK_SIZE)
                    if draw_srswor(frame, design, seed=4, replication_index=r).means_x()[0] == 0)
    with pytest.raises(SimulationError) as excinfo:
        run_replications(frame, design, _specs(["cr"]), reps=BLOCK_SIZE, seed=4)
    assert excinfo.value.replication == expected


@pytest.mark.parametrize("kwargs", [dict(reps=0), dict(seed=-3), dict(workers=0)])
def test_replication_arguments(tiny_frame, tiny_design, kwargs):
    arguments = dict(reps=10, seed=1, workers=1)
    arguments.update(kwargs)
    with pytest.raises(InputError):
        run_replications(tiny_frame, tiny_design, _specs(["t"]), **arguments)


# ============================================================================
# ENUMERATION AND VALIDATION
# ============================================================================

def _brute_force(frame, design, spec):
    pop = summarize_frame(frame, design)
    per_stratum = []
    for sid in frame.stratum_ids:
        y, x = frame.stratum_values(sid)
        per_stratum.append([
            SampleStratum(sid, design[sid], float(np.mean(y[list(c)])), float(np.mean(x[list(c)])))
            for c in itertools.combinations(range(len(y)), design[sid])
        ])
    errors = [evaluate(spec, SampleData(tuple(combo)), pop) - pop.grand_mean_y
              for combo in itertools.product(*per_stratum)]
    return float(np.mean(errors)), float(np.mean(np.square(errors))), len(errors)


@pytest.mark.parametrize("token", TOKENS)
def test_enumeration_matches_brute_force(tiny_frame, tiny_design, token):
    spec = parse_estimator(token)
    bias, mse = enumerate_exact(tiny_frame, tiny_design, spec)
    expected_bias, expected_mse, count = _brute_force(tiny_frame, tiny_design, spec)
    assert count == 36
    assert mse == pytest.approx(expected_mse, rel=1e-9)
    assert bias == pytest.approx(expected_bias, rel=1e-9, abs=1e-12 * math.sqrt(expected_mse))


def test_enumeration_census_and_budget(tiny_frame, tiny_design):
    bias, mse = enumerate_exact(tiny_frame, {"1": 4, "2": 4}, parse_estimator("t"))
    assert bias == pytest.approx(0.0, abs=1e-12)
    assert mse == pytest.approx(0.0, abs=1e-20)
    assert combination_count(tiny_frame, tiny_design) == 36
    with pytest.raises(EnumerationBudgetError, match="Monte Carlo"):
        enumerate_exact(tiny_frame, tiny_design, parse_estimator("t"), budget=10)


def test_validate_exact_and_auto(tiny_frame, tiny_design):
    specs = _specs()
    rows = validate(tiny_frame, tiny_design, specs, method=ValidationMethod.EXACT)
    pop = summarize_frame(tiny_frame, tiny_design)
    for spec, row in zip(specs, rows):
        assert row.estimator == spec.name
        assert row.empirical_mse == enumerate_exact(tiny_frame, tiny_design, spec)[1]
        assert row.theoretical_mse == theoretical(spec, pop)[1]
        assert row.rel_error == relative_error(row.theoretical_mse, row.empirical_mse)
    assert validate(tiny_frame, tiny_design, specs) == rows


def test_validate_falls_back_to_replications(tiny_frame, tiny_design):
    specs = _specs(["cr", "t"])
    rows = validate(tiny_frame, tiny_design, specs, reps=2000, seed=8, budget=10)
    report = run_replications(tiny_frame, tiny_design, specs, reps=2000, seed=8)
    assert [r.empirical_mse for r in rows] == [r.empirical_mse for r in report.rows]
    with pytest.raises(InputError):
        validate(tiny_frame, tiny_design, specs, method="bootstrap")


def test_relative_error_edge_cases():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(0.0, 1.0) == math.inf
    assert relative_error(2.0, 1.5) == 0.25


# ============================================================================
# ACCEPTANCE (Monte Carlo)
# ============================================================================

@pytest.mark.slow
def test_replications_agree_with_enumeration(tiny_frame, tiny_design):
    specs = _specs(["cr", "t", "t_mk_opt"])
    report = run_replications(tiny_frame, tiny_design, specs, reps=1_000_000, seed=42, workers=2)
    for spec in specs:
        _, exact = enumerate_exact(tiny_frame, tiny_design, spec)
        row = report.row(spec.name)
        assert abs(row.empirical_mse - exact) <= 3 * row.mse_se


@pytest.mark.slow
def test_first_order_adequacy_on_moderate_population():
    # beta2x = 1 gives two-point auxiliary values, so every transform constant is equal across strata
    targets = _moderate_targets(rho=0.8, beta2x=1.0)
    frame = generate_population(targets, seed=42)
    design = {s.stratum_id: s.n_h for s in targets}
    tokens = ["t", "t_sd", "t_sk", "t_us1", "t_us2", "t_gns1", "t_gns2"]
    report = run_replications(frame, design, _specs(tokens), reps=100_000, seed=42, workers=2)
    for row in report.rows:
        assert relative_error(row.theoretical_mse, row.empirical_mse) <= 0.10, row.estimator


@pytest.mark.slow
@pytest.mark.parametrize("sd_y, rho", [(10.0, -0.5), (100.0, 0.9)])
def test_empirical_bias_sign_matches_theory(sd_y, rho):
    targets = [
        StratumSummary.from_moments(sid, 500, 10, mean_x=100.0, mean_y=100.0, sd_x=30.0,
                                    sd_y=sd_y, rho=rho, cx=0.3, beta2x=3.0)
        for sid in ("1", "2")
    ]
    frame = generate_population(targets, seed=42)
    report = run_replications(frame, {"1": 10, "2": 10}, _specs(["t"]), reps=100_000, seed=42)
    row = report.row("t")
    assert abs(row.theoretical_bias) > 0.1
    assert np.sign(row.empirical_bias) == np.sign(row.theoretical_bias)
