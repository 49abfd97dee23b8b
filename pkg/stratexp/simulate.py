"""
Design-based validation of the first-order formulas.

Synthetic populations are generated to match target stratum moments, samples
are drawn by stratified SRSWOR, and estimators are replicated to measure their
empirical bias and MSE. Tiny designs can be enumerated exactly instead.

Random streams:
    Every (seed, stratum, block) triple gets its own Philox generator seeded by
    ``SeedSequence(seed, spawn_key=(crc32(stratum_id), block_index))``. A block
    holds BLOCK_SIZE replications; replication r lives in block r // BLOCK_SIZE,
    row r % BLOCK_SIZE. Within a block each stratum draws a (BLOCK_SIZE, N_h)
    matrix of uniforms and each row keeps its n_h smallest keys, which is a
    uniform SRSWOR sample. Results therefore do not depend on the order in
    which blocks run or on the number of worker threads.
"""

import itertools
import logging
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats as scipy_stats

from stratexp.errors import (
    DegenerateDesignError,
    DesignError,
    EnumerationBudgetError,
    EstimationError,
    GenerationError,
    InputError,
    SimulationError,
)
from stratexp.estimators import (
    EstimatorKind,
    EstimatorSpec,
    combined_ratio_kernel,
    exponential_kernel,
    resolve_alpha,
)
from stratexp.stats import (
    PopulationFrame,
    PopulationSummary,
    SampleData,
    SampleStratum,
    StratumSummary,
    check_design_ids,
    stratified_sum,
    summarize_frame,
)
from stratexp.theory import theoretical
from stratexp.transforms import IDENTITY, transformed_means

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
DEFAULT_ENUMERATION_BUDGET = 10_000_000

Design = Union[Mapping[str, int], Iterable[Tuple[str, int]]]


class ValidationMethod:
    EXACT = "exact"
    MC = "mc"
    AUTO = "auto"

    ALL = (EXACT, MC, AUTO)


def _design_mapping(design: Design, frame: PopulationFrame) -> Dict[str, int]:
    """Normalize a design and check it against the frame"""
    items = design.items() if isinstance(design, Mapping) else design
    mapping: Dict[str, int] = {}
    for sid, n_h in items:
        sid = str(sid)
        if sid in mapping:
            raise DesignError(f"duplicate stratum in design: {sid}")
        mapping[sid] = int(n_h)
    check_design_ids(mapping, frame.stratum_ids)
    sizes = frame.stratum_sizes()
    for sid, n_h in mapping.items():
        if not 1 <= n_h <= sizes[sid]:
            raise DesignError(f"stratum {sid}: n_h={n_h} outside [1, {sizes[sid]}]")
    return mapping


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise InputError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def _generator(seed: int, stratum_id: str, *counters: int) -> np.random.Generator:
    key = (zlib.crc32(str(stratum_id).encode("utf-8")),) + tuple(int(c) for c in counters)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


# ============================================================================
# POPULATION GENERATION
# ============================================================================

def _auxiliary_shock(rng: np.random.Generator, size: int, beta2x: float) -> np.ndarray:
    """
    Draw from a symmetric law whose kurtosis is beta2x.

    Student t with df = 4 + 6/(beta - 3) above 3, normal at 3, symmetric
    Beta(a, a) between 1 and 3, balanced signs at 1 or below.
    """
    if beta2x > 3.0:
        return rng.standard_t(4.0 + 6.0 / (beta2x - 3.0), size)
    if beta2x == 3.0:
        return rng.standard_normal(size)
    if beta2x > 1.0:
        a = (6.0 / (3.0 - beta2x) - 3.0) / 2.0
        return rng.beta(a, a, size) - 0.5
    return np.where(rng.permutation(size) < size // 2, -1.0, 1.0)


def _standardize(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean()
    sd = float(np.sqrt(np.sum(centered * centered) / (len(values) - 1)))
    if sd == 0:
        raise GenerationError("degenerate draw with zero spread")
    return centered / sd


def generate_population(targets: Sequence[StratumSummary], seed: int) -> PopulationFrame:
    """
    Unit-level population matching target stratum moments.

    Means, standard deviations and correlations are matched exactly through an
    affine correction of a seeded draw; the auxiliary kurtosis only
    approximately (the realized value is logged and is what summaries of the
    frame report).

    Args:
        targets: One summary per stratum (n_h is ignored)
        seed: Non-negative integer seed

    Returns:
        PopulationFrame with sum(N_h) units in stratum order

    Raises:
        GenerationError: N_h < 3, |rho| > 1 or a non-positive standard deviation
    """
    seed = _check_seed(seed)
    if not targets:
        raise GenerationError("no target strata")

    parts = []
    for target in targets:
        sid = target.stratum_id
        N_h = target.N_h
        if N_h < 3:
            raise GenerationError(f"stratum {sid}: N_h={N_h}, at least 3 units are needed")
        if abs(target.rho) > 1.0:
            raise GenerationError(f"stratum {sid}: infeasible correlation {target.rho}")
        if target.sd_x <= 0 or target.sd_y <= 0:
            raise GenerationError(f"stratum {sid}: standard deviations must be positive")

        rng = _generator(seed, sid)
        beta_target = 3.0 if target.beta2x is None else float(target.beta2x)
        zx = _standardize(_auxiliary_shock(rng, N_h, beta_target))

        noise = rng.standard_normal(N_h)
        noise = noise - noise.mean()
        noise = noise - (np.dot(noise, zx) / np.dot(zx, zx)) * zx
        ze = _standardize(noise)

        rho = float(target.rho)
        zy = rho * zx + math.sqrt(max(0.0, 1.0 - rho * rho)) * ze
        x = target.mean_x + target.sd_x * zx
        y = target.mean_y + target.sd_y * zy

        realized = float(scipy_stats.kurtosis(x, fisher=False, bias=True))
        logger.info(f"Stratum {sid}: {N_h} units, beta2x target {beta_target:.2f} "
                    f"realized {realized:.2f}")
        parts.append(pd.DataFrame({"stratum": [sid] * N_h, "y": y, "x": x}))

    units = pd.concat(parts, ignore_index=True)
    return PopulationFrame(units)


# ============================================================================
# SAMPLING
# ============================================================================

@dataclass(frozen=True, eq=False)
class SampleBlock:
    """Sample means of BLOCK_SIZE consecutive replications, strata along axis 1"""

    block_index: int
    means_y: np.ndarray
    means_x: np.ndarray

    @property
    def first_replication(self) -> int:
        return self.block_index * BLOCK_SIZE


def draw_block(frame: PopulationFrame, design: Design, seed: int,
               block_index: int) -> SampleBlock:
    """
    Stratified SRSWOR sample means for one block of replications.

    Census strata (n_h = N_h) get the population means without drawing.
    """
    seed = _check_seed(seed)
    mapping = _design_mapping(design, frame)
    ids = frame.stratum_ids
    means_y = np.empty((BLOCK_SIZE, len(ids)))
    means_x = np.empty((BLOCK_SIZE, len(ids)))

    for h, sid in enumerate(ids):
        y, x = frame.stratum_values(sid)
        N_h, n_h = len(y), mapping[sid]
        if n_h == N_h:
            means_y[:, h] = float(np.mean(y))
            means_x[:, h] = float(np.mean(x))
            continue
        keys = _generator(seed, sid, block_index).random((BLOCK_SIZE, N_h))
        chosen = np.sort(np.argpartition(keys, n_h - 1, axis=1)[:, :n_h], axis=1)
        means_y[:, h] = y[chosen].mean(axis=1)
        means_x[:, h] = x[chosen].mean(axis=1)
    return SampleBlock(int(block_index), means_y, means_x)


def draw_srswor(frame: PopulationFrame, design: Design, seed: int,
                replication_index: int) -> SampleData:
    """Sample means of one replication, identical to its row in run_replications"""
    if replication_index < 0:
        raise InputError("replication index must be non-negative")
    block_index, row = divmod(int(replication_index), BLOCK_SIZE)
    block = draw_block(frame, design, seed, block_index)
    mapping = _design_mapping(design, frame)
    return SampleData(tuple(
        SampleStratum(sid, mapping[sid], float(block.means_y[row, h]), float(block.means_x[row, h]))
        for h, sid in enumerate(frame.stratum_ids)
    ))


# ============================================================================
# VECTORIZED ESTIMATION
# ============================================================================

@dataclass(frozen=True, eq=False)
class _Prepared:
    """An estimator spec bound to a population: numeric alpha and transform"""

    spec: EstimatorSpec
    alpha: float
    mean_ab: float
    a: np.ndarray
    b: np.ndarray

    @property
    def name(self) -> str:
        return self.spec.name


def _prepare(spec: EstimatorSpec, pop: PopulationSummary) -> _Prepared:
    try:
        alpha = resolve_alpha(spec, pop)
    except DegenerateDesignError:
        if pop.n != pop.N:
            raise
        logger.warning(f"{spec.name}: optimal alpha undefined for a census design; using 0")
        alpha = 0.0
    family = IDENTITY if spec.kind is EstimatorKind.COMBINED_RATIO else spec.family
    mean_ab, builder = transformed_means(pop, family)
    return _Prepared(spec, alpha, mean_ab, builder.a, builder.b)


def _estimate(prepared: _Prepared, mean_y_st, mean_x_ab) -> Tuple[np.ndarray, np.ndarray]:
    """(estimates, mask of draws where the estimator is undefined)"""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if prepared.spec.kind is EstimatorKind.EXPONENTIAL:
            undefined = (prepared.mean_ab + mean_x_ab) == 0
            values = exponential_kernel(mean_y_st, mean_x_ab, prepared.mean_ab, prepared.alpha)
        else:
            undefined = mean_x_ab == 0
            values = combined_ratio_kernel(mean_y_st, mean_x_ab, prepared.mean_ab)
    undefined = undefined | ~np.isfinite(values)
    return values, undefined


def _theoretical_pair(prepared: _Prepared, pop: PopulationSummary) -> Tuple[float, float]:
    spec = prepared.spec
    if spec.is_optimal:
        spec = replace(spec, alpha=prepared.alpha)
    return theoretical(spec, pop)


# ============================================================================
# REPLICATION ENGINE
# ============================================================================

@dataclass(frozen=True)
class SimulationRow:
    estimator: str
    empirical_mean: float
    empirical_bias: float
    empirical_mse: float
    mse_se: float
    theoretical_bias: float
    theoretical_mse: float
    replications: int
    seed: int


@dataclass(frozen=True)
class SimulationReport:
    rows: Tuple[SimulationRow, ...]
    true_mean: float

    def row(self, estimator: str) -> SimulationRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def _block_sums(frame, mapping, seed, block_index, count, prepared, pop) -> np.ndarray:
    """Per spec: sum of estimates, errors, squared and fourth-power errors"""
    block = draw_block(frame, mapping, seed, block_index)
    means_y = block.means_y[:count]
    means_x = block.means_x[:count]
    mean_y_st = stratified_sum(pop.weights, [means_y[:, h] for h in range(means_y.shape[1])])

    sums = np.empty((len(prepared), 4))
    for i, p in enumerate(prepared):
        mean_x_ab = stratified_sum(
            pop.weights,
            [a_h * means_x[:, h] + b_h for h, (a_h, b_h) in enumerate(zip(p.a, p.b))],
        )
        values, undefined = _estimate(p, mean_y_st, mean_x_ab)
        if undefined.any():
            first = block.first_replication + int(np.flatnonzero(undefined)[0])
            raise SimulationError(f"{p.name} undefined (zero denominator)", replication=first)
        errors = values - pop.grand_mean_y
        squared = errors * errors
        sums[i] = (values.sum(), errors.sum(), squared.sum(), (squared * squared).sum())
    return sums


def run_replications(frame: PopulationFrame, design: Design, specs: Sequence[EstimatorSpec],
                     reps: int, seed: int, workers: int = 1) -> SimulationReport:
    """
    Empirical bias and MSE of every spec over ``reps`` stratified SRSWOR samples.

    All specs see the same samples. The true value is the frame's exact mean.

    Args:
        frame: Unit-level population
        design: stratum_id -> n_h
        specs: Estimators to replicate
        reps: Number of replications
        seed: Non-negative integer seed
        workers: Threads; the report does not depend on this value

    Raises:
        SimulationError: an estimator is undefined on some replication
    """
    seed = _check_seed(seed)
    if reps < 1:
        raise InputError("replications must be >= 1")
    if workers < 1:
        raise InputError("workers must be >= 1")
    if not specs:
        raise InputError("no estimators to simulate")

    mapping = _design_mapping(design, frame)
    pop = summarize_frame(frame, mapping)
    prepared = [_prepare(spec, pop) for spec in specs]

    blocks = math.ceil(reps / BLOCK_SIZE)
    counts = [min(BLOCK_SIZE, reps - b * BLOCK_SIZE) for b in range(blocks)]
    logger.info(f"Running {reps} replications in {blocks} block(s) on {workers} worker(s)")

    def work(block_index: int) -> np.ndarray:
        return _block_sums(frame, mapping, seed, block_index, counts[block_index], prepared, pop)

    if workers == 1:
        partials = [work(b) for b in range(blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            partials = list(executor.map(work, range(blocks)))

    # fixed reduction order keeps the report independent of scheduling
    totals = np.zeros((len(prepared), 4))
    for partial in partials:
        totals = totals + partial

    scale = max(abs(pop.grand_mean_y) ** 2, 1.0)
    rows = []
    for p, (sum_est, sum_err, sum_sq, sum_quad) in zip(prepared, totals):
        mean_est = float(sum_est) / reps
        bias = float(sum_err) / reps
        mse = float(sum_sq) / reps
        if reps > 1:
            spread = max(0.0, (float(sum_quad) - reps * mse * mse) / (reps - 1))
            mse_se = math.sqrt(spread / reps)
        else:
            mse_se = math.nan
        if mse < bias * bias - 1e-9 * scale:
            logger.warning(f"{p.name}: empirical MSE below squared bias beyond rounding")
        theory_bias, theory_mse = _theoretical_pair(p, pop)
        rows.append(SimulationRow(p.name, mean_est, bias, mse, mse_se,
                                  theory_bias, theory_mse, int(reps), seed))

    logger.info(f"Simulation finished: {len(rows)} estimator(s), true mean {pop.grand_mean_y!r}")
    return SimulationReport(tuple(rows), pop.grand_mean_y)


# ============================================================================
# EXACT ENUMERATION
# ============================================================================

def combination_count(frame: PopulationFrame, design: Design) -> int:
    """Number of equally likely stratified samples, prod C(N_h, n_h)"""
    mapping = _design_mapping(design, frame)
    sizes = frame.stratum_sizes()
    return math.prod(math.comb(sizes[sid], n_h) for sid, n_h in mapping.items())


def _stratum_combination_means(y: np.ndarray, x: np.ndarray,
                               n_h: int) -> Tuple[np.ndarray, np.ndarray]:
    if n_h == len(y):
        return np.array([float(np.mean(y))]), np.array([float(np.mean(x))])
    combos = np.array(list(itertools.combinations(range(len(y)), n_h)), dtype=np.intp)
    return y[combos].mean(axis=1), x[combos].mean(axis=1)


def _enumerate(frame: PopulationFrame, design: Design, specs: Sequence[EstimatorSpec],
               budget: int) -> List[Tuple[float, float]]:
    mapping = _design_mapping(design, frame)
    total = combination_count(frame, mapping)
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} stratified samples exceed the enumeration budget of {budget}; "
            f"use Monte Carlo replications instead"
        )
    pop = summarize_frame(frame, mapping)
    logger.info(f"Enumerating {total} stratified samples")

    per_stratum = [
        _stratum_combination_means(*frame.stratum_values(sid), mapping[sid])
        for sid in frame.stratum_ids
    ]
    mean_y_st = np.zeros(1)
    for w_h, (my, _) in zip(pop.weights, per_stratum):
        mean_y_st = np.add.outer(mean_y_st, w_h * my).ravel()

    results = []
    for spec in specs:
        prepared = _prepare(spec, pop)
        mean_x_ab = np.zeros(1)
        for w_h, a_h, b_h, (_, mx) in zip(pop.weights, prepared.a, prepared.b, per_stratum):
            mean_x_ab = np.add.outer(mean_x_ab, w_h * (a_h * mx + b_h)).ravel()
        values, undefined = _estimate(prepared, mean_y_st, mean_x_ab)
        if undefined.any():
            raise EstimationError(
                f"{spec.name} undefined on stratified sample {int(np.flatnonzero(undefined)[0])}"
            )
        errors = values - pop.grand_mean_y
        results.append((float(np.mean(errors)), float(np.mean(errors * errors))))
    return results


def enumerate_exact(frame: PopulationFrame, design: Design, spec: EstimatorSpec,
                    budget: int = DEFAULT_ENUMERATION_BUDGET) -> Tuple[float, float]:
    """
    Exact (bias, mse) over every stratified SRSWOR sample, all equally likely.

    Raises:
        EnumerationBudgetError: prod C(N_h, n_h) exceeds ``budget``
    """
    return _enumerate(frame, design, [spec], budget)[0]


# ============================================================================
# VALIDATION
# ============================================================================

@dataclass(frozen=True)
class ValidationRow:
    estimator: str
    theoretical_mse: float
    empirical_mse: float
    rel_error: float


def relative_error(theory: float, empirical: float) -> float:
    """|empirical - theory| / |theory|; 0 when both vanish, inf when only theory does"""
    if theory == 0:
        return 0.0 if empirical == 0 else math.inf
    return abs(empirical - theory) / abs(theory)


def validate(frame: PopulationFrame, design: Design, specs: Sequence[EstimatorSpec],
             method: str = ValidationMethod.AUTO, reps: int = 100_000, seed: int = 42,
             budget: int = DEFAULT_ENUMERATION_BUDGET, workers: int = 1) -> List[ValidationRow]:
    """
    Tabulate first-order MSE against the exact or simulated MSE.

    ``auto`` enumerates when the number of stratified samples fits ``budget``
    and replicates otherwise.
    """
    if method not in ValidationMethod.ALL:
        raise InputError(f"unknown validation method {method!r}")
    if not specs:
        raise InputError("no estimators to validate")
    mapping = _design_mapping(design, frame)

    if method == ValidationMethod.AUTO:
        method = (ValidationMethod.EXACT if combination_count(frame, mapping) <= budget
                  else ValidationMethod.MC)
        logger.info(f"Validation method: {method}")

    if method == ValidationMethod.EXACT:
        pop = summarize_frame(frame, mapping)
        exact = _enumerate(frame, mapping, specs, budget)
        pairs = [
            (spec.name, _theoretical_pair(_prepare(spec, pop), pop)[1], mse)
            for spec, (_, mse) in zip(specs, exact)
        ]
    else:
        report = run_replications(frame, mapping, specs, reps, seed, workers)
        pairs = [(r.estimator, r.theoretical_mse, r.empirical_mse) for r in report.rows]

    return [ValidationRow(name, theory, empirical, relative_error(theory, empirical))
            for name, theory, empirical in pairs]
