"""
First-order bias and MSE of the stratified ratio-type estimators.

Every quantity is a weighted sum over strata with the common factor
w_h^2 * gamma_h. The exponential family's MSE is a quadratic in alpha,
minimized at alpha_opt, where it reaches sum w_h^2 gamma_h S_yh^2 (1 - rho_c^2)
whatever the transformation (a, b).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from stratexp.errors import DegenerateDesignError, SingularTransformError
from stratexp.estimators import (
    EstimatorKind,
    EstimatorSpec,
    resolve_alpha,
)
from stratexp.stats import PopulationSummary, stratified_sum
from stratexp.transforms import IDENTITY, NAMED_FAMILIES, TransformFamily, ratio_and_theta

logger = logging.getLogger(__name__)

NEGATIVE_MSE_SLACK = 1e-9

FOOTNOTE_BIAS = (
    "bias uses the general coefficient alpha(alpha+2)/8 for every family (3R/8 at alpha=1); "
    "the published per-family bias formulas print R/8 for SD, SK, US1, US2 and GNS1"
)
FOOTNOTE_BIAS_ALPHA = (
    "the covariance term of the exponential bias is -1/2 S_yxh for every alpha as published; "
    "the exact linearization gives -(alpha/2) S_yxh, so bias at alpha != 1 is the published formula"
)
FOOTNOTE_MK = (
    "t_MK(opt) agrees with the published 218374.8898 only within 10%: the published table "
    "was computed from unrounded data, the inputs here are the rounded published statistics"
)
FOOTNOTE_GNS = (
    "t_GNS1/t_GNS2 follow the formulas as defined; the published R_GNS1, R_GNS2 and their MSE "
    "rows cannot be reproduced from the published stratum statistics"
)


def _sum(pop: PopulationSummary, values) -> float:
    """sum_h w_h^2 gamma_h v_h, in stratum order"""
    return float(stratified_sum(pop.design_weights(), values))


def variance_stratified_mean(pop: PopulationSummary) -> float:
    """sum w_h^2 gamma_h S_yh^2, the variance of ybar_st"""
    sd_y = pop.column("sd_y")
    return _sum(pop, sd_y * sd_y)


def dispersion_x(pop: PopulationSummary) -> float:
    """sum w_h^2 gamma_h S_xh^2"""
    sd_x = pop.column("sd_x")
    return _sum(pop, sd_x * sd_x)


def covariance_yx(pop: PopulationSummary) -> float:
    """sum w_h^2 gamma_h S_yxh"""
    return _sum(pop, pop.column("cov_xy"))


def population_ratio(pop: PopulationSummary) -> float:
    """R = Ybar_st / Xbar_st"""
    if pop.grand_mean_x == 0:
        raise SingularTransformError("population auxiliary mean Xbar_st is zero")
    return ratio_and_theta(pop, IDENTITY).ratio


def _mse_quadratic(pop: PopulationSummary, ratio: float, alpha: float) -> float:
    """sum w_h^2 gamma_h [S_yh^2 - alpha R S_yxh + alpha^2 R^2 / 4 S_xh^2]"""
    sd_y = pop.column("sd_y")
    sd_x = pop.column("sd_x")
    cov = pop.column("cov_xy")
    terms = sd_y * sd_y - alpha * ratio * cov + (alpha * alpha * ratio * ratio / 4.0) * (sd_x * sd_x)
    return _sum(pop, terms)


# ============================================================================
# RATIO ESTIMATORS
# ============================================================================

def mse_combined_ratio(pop: PopulationSummary) -> float:
    """sum w_h^2 gamma_h [S_yh^2 + R^2 S_xh^2 - 2 R S_yxh]"""
    return _mse_quadratic(pop, population_ratio(pop), 2.0)


def mse_kc(pop: PopulationSummary, family: TransformFamily) -> float:
    """sum w_h^2 gamma_h [S_yh^2 + R_ab^2 S_xh^2 - 2 R_ab S_yxh]"""
    return _mse_quadratic(pop, ratio_and_theta(pop, family).ratio, 2.0)


def bias_combined_ratio(pop: PopulationSummary) -> float:
    """(1 / Xbar_st) sum w_h^2 gamma_h (R S_xh^2 - S_yxh)"""
    ratio = population_ratio(pop)
    sd_x = pop.column("sd_x")
    return _sum(pop, ratio * sd_x * sd_x - pop.column("cov_xy")) / pop.grand_mean_x


def bias_kc(pop: PopulationSummary, family: TransformFamily) -> float:
    """(1 / Xbar_st) sum w_h^2 gamma_h theta_ab (R_ab S_xh^2 - S_yxh)"""
    if pop.grand_mean_x == 0:
        raise SingularTransformError("population auxiliary mean Xbar_st is zero")
    derived = ratio_and_theta(pop, family)
    sd_x = pop.column("sd_x")
    terms = derived.theta * (derived.ratio * sd_x * sd_x - pop.column("cov_xy"))
    return _sum(pop, terms) / pop.grand_mean_x


# ============================================================================
# EXPONENTIAL FAMILY
# ============================================================================

def bias_exponential(pop: PopulationSummary, family: TransformFamily, alpha: float) -> float:
    """
    (1 / Xbar_st) sum w_h^2 gamma_h theta_ab (alpha(alpha+2) R_ab / 8 S_xh^2 - 1/2 S_yxh)
    """
    if pop.grand_mean_x == 0:
        raise SingularTransformError("population auxiliary mean Xbar_st is zero")
    derived = ratio_and_theta(pop, family)
    sd_x = pop.column("sd_x")
    coefficient = alpha * (alpha + 2.0) * derived.ratio / 8.0
    terms = derived.theta * (coefficient * sd_x * sd_x - 0.5 * pop.column("cov_xy"))
    return _sum(pop, terms) / pop.grand_mean_x


def mse_exponential(pop: PopulationSummary, family: TransformFamily, alpha: float) -> float:
    """sum w_h^2 gamma_h [S_yh^2 - alpha R_ab S_yxh + alpha^2 R_ab^2 / 4 S_xh^2]"""
    return _mse_quadratic(pop, ratio_and_theta(pop, family).ratio, float(alpha))


def alpha_opt(pop: PopulationSummary, family: TransformFamily) -> float:
    """
    alpha minimizing the exponential-family MSE:
    2 sum w_h^2 gamma_h S_yxh / (R_ab sum w_h^2 gamma_h S_xh^2)

    Raises:
        DegenerateDesignError: R_ab = 0 or no auxiliary dispersion in the design
    """
    ratio = ratio_and_theta(pop, family).ratio
    spread = dispersion_x(pop)
    if ratio == 0 or spread <= 0:
        raise DegenerateDesignError(
            f"optimal alpha undefined for family {family.label} "
            f"(R_ab={ratio!r}, sum w^2 gamma S_x^2={spread!r})"
        )
    return 2.0 * covariance_yx(pop) / (ratio * spread)


def rho_c_squared(pop: PopulationSummary) -> float:
    """
    Combined correlation across strata:
    (sum w^2 gamma rho S_y S_x)^2 / (sum w^2 gamma S_y^2 * sum w^2 gamma S_x^2)
    """
    spread_y = variance_stratified_mean(pop)
    spread_x = dispersion_x(pop)
    if spread_y <= 0 or spread_x <= 0:
        raise DegenerateDesignError("combined correlation undefined: no dispersion in y or x")
    numerator = _sum(pop, pop.column("rho") * pop.column("sd_y") * pop.column("sd_x"))
    value = numerator * numerator / (spread_y * spread_x)
    # Cauchy-Schwarz; rounding may exceed 1 by a few ulps
    assert -1e-12 <= value <= 1.0 + 1e-12, f"rho_c^2 out of range: {value}"
    return value


def mse_mk_min(pop: PopulationSummary) -> float:
    """sum w_h^2 gamma_h S_yh^2 (1 - rho_c^2), the same for every (a, b)"""
    return variance_stratified_mean(pop) * (1.0 - rho_c_squared(pop))


def theoretical(spec: EstimatorSpec, pop: PopulationSummary) -> Tuple[float, float]:
    """(bias, mse) of any estimator spec"""
    if spec.kind is EstimatorKind.COMBINED_RATIO:
        return bias_combined_ratio(pop), mse_combined_ratio(pop)
    if spec.kind is EstimatorKind.KC:
        return bias_kc(pop, spec.family), mse_kc(pop, spec.family)
    alpha = resolve_alpha(spec, pop)
    return bias_exponential(pop, spec.family, alpha), mse_exponential(pop, spec.family, alpha)


# ============================================================================
# REPORT
# ============================================================================

@dataclass(frozen=True)
class TheoryRow:
    estimator: str
    bias: float
    mse: float


@dataclass(frozen=True)
class TheoreticalReport:
    rows: Tuple[TheoryRow, ...]
    alpha_opt: float
    rho_c_squared: float
    mse_mk_min: float
    footnotes: Tuple[str, ...] = field(default_factory=tuple)

    def row(self, estimator: str) -> TheoryRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def full_report(pop: PopulationSummary,
                families: Optional[Sequence[TransformFamily]] = None) -> TheoreticalReport:
    """
    Bias and MSE of t, the transformed members at alpha = 1 and t_MK(opt).

    Args:
        pop: Population summary under the design
        families: Transformed members to report; SD, SK, US1, US2, GNS1, GNS2
            (in that order) when None
    """
    if families is None:
        families = [TransformFamily.named(name) for name in NAMED_FAMILIES]
    families = [IDENTITY] + list(families)
    rows: List[TheoryRow] = []
    for family in families:
        name = "t" if family is IDENTITY else f"t_{family.label}"
        rows.append(TheoryRow(name, bias_exponential(pop, family, 1.0),
                              mse_exponential(pop, family, 1.0)))

    scale = variance_stratified_mean(pop)
    notes = [FOOTNOTE_BIAS, FOOTNOTE_BIAS_ALPHA]

    best_alpha: Optional[float] = None
    rho_sq = 0.0
    mk_min = scale
    if dispersion_x(pop) > 0 and scale > 0:
        best_alpha = alpha_opt(pop, IDENTITY)
        rho_sq = rho_c_squared(pop)
        mk_min = mse_mk_min(pop)
        rows.append(TheoryRow("t_MK(opt)", bias_exponential(pop, IDENTITY, best_alpha), mk_min))
    else:
        # census or no dispersion: the optimal alpha is arbitrary, the minimum MSE is V
        logger.warning("Optimal alpha undefined (no dispersion in the design); using alpha = 0")
        best_alpha = 0.0
        rows.append(TheoryRow("t_MK(opt)", bias_exponential(pop, IDENTITY, 0.0), mk_min))

    for r in rows:
        if r.mse < -NEGATIVE_MSE_SLACK * max(scale, 1.0):
            logger.warning(f"Negative MSE for {r.estimator}: {r.mse!r}")
            notes.append(f"{r.estimator}: MSE {r.mse!r} is negative beyond rounding")
    for r in rows[:-1]:
        if mk_min > r.mse + NEGATIVE_MSE_SLACK * max(scale, 1.0):
            logger.warning(f"t_MK(opt) MSE exceeds {r.estimator}")
            notes.append(f"t_MK(opt) MSE exceeds {r.estimator}; check the input statistics")

    notes.extend([FOOTNOTE_MK, FOOTNOTE_GNS])
    logger.info(f"Theory report: alpha_opt={best_alpha:.4f} rho_c^2={rho_sq:.4f}")
    return TheoreticalReport(tuple(rows), best_alpha, rho_sq, mk_min, tuple(notes))
