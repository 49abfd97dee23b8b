"""
Efficiency conditions within the exponential family.

A transformed estimator t_fam beats the plain exponential estimator t exactly
when -A (R_fam - R) + B/4 (R_fam - R)(R_fam + R) < 0, with
A = sum w_h^2 gamma_h S_yxh and B = sum w_h^2 gamma_h S_xh^2. The optimal
member t_MK(opt) beats every alpha = 1 member by (A - R_ab B / 2)^2 / B.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from stratexp.errors import ConsistencyError
from stratexp.stats import PopulationSummary
from stratexp.theory import (
    covariance_yx,
    dispersion_x,
    mse_exponential,
    mse_mk_min,
    population_ratio,
    variance_stratified_mean,
)
from stratexp.transforms import IDENTITY, NAMED_FAMILIES, TransformFamily, ratio_and_theta

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-9


class Branch(str, Enum):
    SAME_SIGN_POSITIVE = "SAME_SIGN_POSITIVE"
    SAME_SIGN_NEGATIVE = "SAME_SIGN_NEGATIVE"
    EQUAL = "EQUAL"


class Decision(str, Enum):
    FAMILY_BETTER = "FAMILY_BETTER"
    PLAIN_BETTER = "PLAIN_BETTER"
    TIE = "TIE"


@dataclass(frozen=True)
class EfficiencyVerdict:
    family: str
    A: float
    B: float
    threshold: float
    branch: Branch
    decision: Decision


def moments_ab(pop: PopulationSummary) -> Tuple[float, float]:
    """(A, B) = (sum w_h^2 gamma_h S_yxh, sum w_h^2 gamma_h S_xh^2)"""
    return covariance_yx(pop), dispersion_x(pop)


def compare_family_vs_plain(pop: PopulationSummary, family: TransformFamily) -> EfficiencyVerdict:
    """
    Decide whether t_fam (alpha = 1) is more efficient than t.

    (R_fam - R)(R_fam + R) > 0: family better iff B < 4A / (R_fam + R)
    (R_fam - R)(R_fam + R) < 0: family better iff B > 4A / (R_fam + R)
    R_fam = R (relative 1e-12): tie
    """
    A, B = moments_ab(pop)
    ratio = population_ratio(pop)
    ratio_fam = ratio_and_theta(pop, family).ratio
    total = ratio_fam + ratio
    threshold = 4.0 * A / total if total != 0 else math.inf

    if abs(ratio_fam - ratio) <= TIE_TOLERANCE * max(abs(ratio), abs(ratio_fam)):
        return EfficiencyVerdict(family.label, A, B, threshold, Branch.EQUAL, Decision.TIE)

    product = (ratio_fam - ratio) * total
    if product > 0:
        branch = Branch.SAME_SIGN_POSITIVE
        better = B < threshold
    elif product < 0:
        branch = Branch.SAME_SIGN_NEGATIVE
        better = B > threshold
    else:
        # R_fam = -R: both MSEs share the quadratic term, compare the linear ones
        branch = Branch.EQUAL
        better = (ratio_fam - ratio) * A > 0

    if B == threshold:
        decision = Decision.TIE
    else:
        decision = Decision.FAMILY_BETTER if better else Decision.PLAIN_BETTER
    logger.debug(f"{family.label}: R_fam={ratio_fam!r} R={ratio!r} -> {decision.value}")
    return EfficiencyVerdict(family.label, A, B, threshold, branch, decision)


def compare_all(pop: PopulationSummary,
                families: Optional[Sequence[TransformFamily]] = None) -> List[EfficiencyVerdict]:
    """Verdicts for SD, SK, US1, US2, GNS1, GNS2 in that order (or for ``families``)"""
    if families is None:
        families = [TransformFamily.named(name) for name in NAMED_FAMILIES]
    return [compare_family_vs_plain(pop, family) for family in families]


def verify_mk_dominance(pop: PopulationSummary, family: TransformFamily = IDENTITY) -> float:
    """
    MSE(t_fam, alpha = 1) - MSE(t_MK)_min.

    Checked against the closed form (A - R_ab B / 2)^2 / B when B > 0.

    Raises:
        ConsistencyError: the two computations disagree beyond rounding
    """
    A, B = moments_ab(pop)
    plain = mse_exponential(pop, family, 1.0)
    if B <= 0:
        logger.warning("B = 0: dominance identity not checked")
        return plain - variance_stratified_mean(pop)

    difference = plain - mse_mk_min(pop)
    ratio = ratio_and_theta(pop, family).ratio
    closed = (A - ratio * B / 2.0) ** 2 / B
    scale = max(abs(plain), variance_stratified_mean(pop), abs(closed))
    if abs(difference - closed) > IDENTITY_TOLERANCE * scale:
        raise ConsistencyError(
            f"t_MK dominance identity failed for {family.label}: "
            f"difference={difference!r} closed form={closed!r}"
        )
    return difference
