"""
Point estimators of the population mean under stratified sampling.

All estimators depend on the sample only through ybar_st and the (transformed)
auxiliary mean, so each has a kernel working on scalars or replication arrays;
the scalar entry points and the simulation engine share these kernels.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from stratexp.errors import EstimationError, InputError, SingularTransformError
from stratexp.stats import PopulationSummary, SampleData
from stratexp.transforms import IDENTITY, FamilyName, TransformFamily, transformed_means

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"

Alpha = Union[float, str]


class EstimatorKind(str, Enum):
    COMBINED_RATIO = "combined_ratio"
    KC = "kc"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class EstimatorSpec:
    """
    Which estimator to evaluate.

    COMBINED_RATIO ignores family and alpha; EXPONENTIAL with IDENTITY and
    alpha = 1 is the plain exponential estimator t. ``alpha`` may be the
    OPTIMAL marker, resolved against population dispersions by the theory module.
    """

    kind: EstimatorKind
    family: TransformFamily = IDENTITY
    alpha: Alpha = 1.0

    def __post_init__(self):
        if self.alpha != OPTIMAL and not isinstance(self.alpha, (int, float)):
            raise InputError(f"alpha must be a number or '{OPTIMAL}', got {self.alpha!r}")

    @property
    def is_optimal(self) -> bool:
        return self.kind is EstimatorKind.EXPONENTIAL and self.alpha == OPTIMAL

    @property
    def name(self) -> str:
        suffix = "" if self.family.name is FamilyName.IDENTITY else f"_{self.family.label}"
        if self.kind is EstimatorKind.COMBINED_RATIO:
            return "y_CR"
        if self.kind is EstimatorKind.KC:
            return f"y_KC{suffix}"
        if self.is_optimal:
            return f"t_MK(opt){suffix}"
        if float(self.alpha) == 1.0:
            return f"t{suffix}"
        return f"t_MK{suffix}[alpha={float(self.alpha):g}]"


COMBINED_RATIO = EstimatorSpec(EstimatorKind.COMBINED_RATIO)


def parse_estimator(token: str) -> EstimatorSpec:
    """
    Parse a command-line estimator token.

    Accepted: cr, kc, kc_<family>, t, t_<family>, t_mk_opt, t_mk_opt_<family>,
    t_mk@<alpha>, t_mk_<family>@<alpha>.
    """
    text = token.strip().lower()
    if not text:
        raise InputError("empty estimator name")

    alpha: Alpha = 1.0
    if "@" in text:
        text, _, alpha_text = text.partition("@")
        try:
            alpha = float(alpha_text)
        except ValueError:
            raise InputError(f"bad alpha in estimator {token!r}")
        if not math.isfinite(alpha):
            raise InputError(f"bad alpha in estimator {token!r}")
        if not text.startswith("t_mk"):
            raise InputError(f"only t_mk estimators take an explicit alpha: {token!r}")

    def family_of(rest: str) -> TransformFamily:
        return IDENTITY if not rest else TransformFamily.named(rest)

    if text == "cr":
        return COMBINED_RATIO
    if text == "kc" or text.startswith("kc_"):
        return EstimatorSpec(EstimatorKind.KC, family_of(text[3:]))
    if text == "t_mk_opt" or text.startswith("t_mk_opt_"):
        return EstimatorSpec(EstimatorKind.EXPONENTIAL, family_of(text[9:]), OPTIMAL)
    if text == "t_mk" or text.startswith("t_mk_"):
        if "@" not in token:
            raise InputError(f"t_mk needs '_opt' or '@<alpha>': {token!r}")
        return EstimatorSpec(EstimatorKind.EXPONENTIAL, family_of(text[5:]), alpha)
    if text == "t" or text.startswith("t_"):
        return EstimatorSpec(EstimatorKind.EXPONENTIAL, family_of(text[2:]), 1.0)
    raise InputError(f"unknown estimator {token!r}")


# ============================================================================
# KERNELS
# ============================================================================

def combined_ratio_kernel(mean_y_st, mean_x_st, grand_mean_x: float):
    """(ybar_st / xbar_st) * Xbar_st"""
    return mean_y_st / mean_x_st * grand_mean_x


def exponential_kernel(mean_y_st, mean_x_ab, mean_ab: float, alpha: float):
    """ybar_st * exp(alpha * (Xbar_ab - xbar_ab) / (Xbar_ab + xbar_ab))"""
    return mean_y_st * np.exp(alpha * (mean_ab - mean_x_ab) / (mean_ab + mean_x_ab))


# ============================================================================
# ESTIMATORS
# ============================================================================

def estimate_combined_ratio(sample: SampleData, pop: PopulationSummary) -> float:
    """
    Combined ratio estimator (ybar_st / xbar_st) * Xbar_st.

    Raises:
        EstimationError: xbar_st is zero
    """
    mean_x_st = sample.mean_x_st(pop)
    if mean_x_st == 0:
        raise EstimationError("sample auxiliary mean xbar_st is zero")
    return float(combined_ratio_kernel(sample.mean_y_st(pop), mean_x_st, pop.grand_mean_x))


def estimate_kc(sample: SampleData, pop: PopulationSummary, family: TransformFamily) -> float:
    """
    Transformed ratio estimator (ybar_st / xbar_st,ab) * Xbar_st,ab.

    Raises:
        EstimationError: xbar_st,ab is zero
    """
    mean_ab, builder = transformed_means(pop, family)
    mean_x_ab = builder(sample)
    if mean_x_ab == 0:
        raise EstimationError(f"transformed sample mean is zero for family {family.label}")
    return float(combined_ratio_kernel(sample.mean_y_st(pop), mean_x_ab, mean_ab))


def estimate_exponential(sample: SampleData, pop: PopulationSummary,
                         family: TransformFamily, alpha: float) -> float:
    """
    Exponential ratio-type estimator with power alpha.

    alpha = 1 gives t (IDENTITY) and t_SD, t_SK, t_US1, t_US2, t_GNS1, t_GNS2.

    Raises:
        SingularTransformError: Xbar_st,ab + xbar_st,ab is zero
    """
    if alpha == OPTIMAL:
        raise EstimationError("resolve the optimal alpha first (see evaluate)")
    mean_ab, builder = transformed_means(pop, family)
    mean_x_ab = builder(sample)
    if mean_ab + mean_x_ab == 0:
        raise SingularTransformError(
            f"Xbar_ab + xbar_ab is zero for family {family.label}"
        )
    if mean_x_ab < 0:
        logger.warning(f"Negative transformed sample mean {mean_x_ab:g} for family {family.label}")
    return float(exponential_kernel(sample.mean_y_st(pop), mean_x_ab, mean_ab, float(alpha)))


def resolve_alpha(spec: EstimatorSpec, pop: PopulationSummary) -> float:
    """Numeric alpha of a spec (the optimal one when marked OPTIMAL)"""
    if spec.is_optimal:
        from stratexp.theory import alpha_opt
        return alpha_opt(pop, spec.family)
    return float(spec.alpha)


def evaluate(spec: EstimatorSpec, sample: SampleData, pop: PopulationSummary) -> float:
    if spec.kind is EstimatorKind.COMBINED_RATIO:
        return estimate_combined_ratio(sample, pop)
    if spec.kind is EstimatorKind.KC:
        return estimate_kc(sample, pop, spec.family)
    return estimate_exponential(sample, pop, spec.family, resolve_alpha(spec, pop))
