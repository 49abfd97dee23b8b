"""
Transformation families for the auxiliary variable.

A family maps every stratum to a pair (a_h, b_h) built from known population
constants; the transformed auxiliary mean is sum w_h (a_h * mean_x_h + b_h).
The derived ratio R_ab and factor theta_ab parameterize every transformed
estimator's bias and MSE.

    IDENTITY (1, 0)        SD   (1, C_xh)       SK   (1, beta2h)
    US1 (beta2h, C_xh)     US2  (C_xh, beta2h)  GNS1 (1, S_xh)
    GNS2 (beta2h, S_xh)    CUSTOM (a_h, b_h) given per stratum
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from stratexp.errors import IngestError, SingularTransformError, TransformConfigError
from stratexp.stats import (
    PopulationSummary,
    SampleData,
    Source,
    StratumSummary,
    numeric_column,
    read_csv_table,
    read_text,
    stratified_sum,
)

logger = logging.getLogger(__name__)

CUSTOM_HEADER = ("stratum", "a", "b")


class FamilyName(str, Enum):
    IDENTITY = "identity"
    SD = "sd"
    SK = "sk"
    US1 = "us1"
    US2 = "us2"
    GNS1 = "gns1"
    GNS2 = "gns2"
    CUSTOM = "custom"


NAMED_FAMILIES = (
    FamilyName.SD, FamilyName.SK, FamilyName.US1,
    FamilyName.US2, FamilyName.GNS1, FamilyName.GNS2,
)

# (a source, b source) per named family; None means the constant 1 or 0
_RULES: Dict[FamilyName, Tuple[Optional[str], Optional[str]]] = {
    FamilyName.IDENTITY: (None, None),
    FamilyName.SD: (None, "cx"),
    FamilyName.SK: (None, "beta2x"),
    FamilyName.US1: ("beta2x", "cx"),
    FamilyName.US2: ("cx", "beta2x"),
    FamilyName.GNS1: (None, "sd_x"),
    FamilyName.GNS2: ("beta2x", "sd_x"),
}


@dataclass(frozen=True)
class TransformFamily:
    """A named (a_h, b_h) rule, or explicit per-stratum pairs for CUSTOM"""

    name: FamilyName
    pairs: Tuple[Tuple[str, float, float], ...] = ()

    @classmethod
    def named(cls, name: Union[str, FamilyName]) -> "TransformFamily":
        try:
            family = FamilyName(str(name.value if isinstance(name, FamilyName) else name).lower())
        except ValueError:
            choices = ", ".join(f.value for f in FamilyName if f is not FamilyName.CUSTOM)
            raise TransformConfigError(str(name), f"a known family name ({choices})")
        if family is FamilyName.CUSTOM:
            raise TransformConfigError("CUSTOM", "explicit (a, b) pairs")
        return cls(family)

    @classmethod
    def custom(cls, pairs: Mapping[str, Tuple[float, float]]) -> "TransformFamily":
        if not pairs:
            raise TransformConfigError("CUSTOM", "at least one (stratum, a, b) row")
        return cls(
            FamilyName.CUSTOM,
            tuple((str(sid), float(a), float(b)) for sid, (a, b) in pairs.items()),
        )

    @property
    def label(self) -> str:
        """Upper-case tag used in estimator names (t_SD, t_GNS1, ...)"""
        return self.name.value.upper()

    def custom_pair(self, stratum_id: str) -> Tuple[float, float]:
        for sid, a, b in self.pairs:
            if sid == stratum_id:
                return a, b
        raise TransformConfigError("CUSTOM", "an (a, b) pair", stratum_id)


IDENTITY = TransformFamily(FamilyName.IDENTITY)


def parse_family(name: str) -> TransformFamily:
    return TransformFamily.named(name)


def load_custom_family(source: Source) -> TransformFamily:
    """Read per-stratum coefficients (CSV header ``stratum,a,b``)"""
    df = read_csv_table(read_text(source), CUSTOM_HEADER, "custom coefficients")
    a = numeric_column(df, "a", "custom coefficients")
    b = numeric_column(df, "b", "custom coefficients")
    pairs: Dict[str, Tuple[float, float]] = {}
    for position, (sid, a_h, b_h) in enumerate(zip(df["stratum"], a, b)):
        if sid in pairs:
            raise IngestError(f"duplicate stratum {sid} in custom coefficients", line=position + 2)
        pairs[str(sid)] = (float(a_h), float(b_h))
    return TransformFamily.custom(pairs)


# ============================================================================
# COEFFICIENTS AND TRANSFORMED MEANS
# ============================================================================

def coefficients(family: TransformFamily, summary: StratumSummary) -> Tuple[float, float]:
    """
    (a_h, b_h) of one stratum.

    Raises:
        TransformConfigError: a constant the family needs (cx, beta2x) is missing
    """
    if family.name is FamilyName.CUSTOM:
        return family.custom_pair(summary.stratum_id)

    a_source, b_source = _RULES[family.name]
    values = []
    for source, neutral in ((a_source, 1.0), (b_source, 0.0)):
        if source is None:
            values.append(neutral)
            continue
        value = getattr(summary, source)
        if value is None:
            raise TransformConfigError(family.label, source, summary.stratum_id)
        values.append(float(value))
    return values[0], values[1]


@dataclass(frozen=True, eq=False)
class SampleMeanBuilder:
    """Applies a family's (a_h, b_h) to sample means: sum w_h (a_h xbar_h + b_h)"""

    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    stratum_ids: Tuple[str, ...] = ()

    def __call__(self, sample: SampleData) -> float:
        sample.check_strata(self.stratum_ids)
        return float(self.stacked(sample.means_x()))

    def stacked(self, means_x) -> Union[float, np.ndarray]:
        """
        Vectorized form.

        Args:
            means_x: shape (L,) or (reps, L) with strata along the last axis
        """
        means_x = np.asarray(means_x, dtype=float)
        columns = [means_x[..., h] for h in range(len(self.weights))]
        return stratified_sum(
            self.weights,
            [a_h * col + b_h for a_h, b_h, col in zip(self.a, self.b, columns)],
        )


def _coefficient_arrays(pop: PopulationSummary,
                        family: TransformFamily) -> Tuple[np.ndarray, np.ndarray]:
    pairs = [coefficients(family, s) for s in pop.strata]
    a = np.array([p[0] for p in pairs], dtype=float)
    b = np.array([p[1] for p in pairs], dtype=float)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def transformed_means(pop: PopulationSummary,
                      family: TransformFamily) -> Tuple[float, SampleMeanBuilder]:
    """
    Population transformed mean and a builder for the sample counterpart.

    Returns:
        (sum w_h (a_h Xbar_h + b_h), builder); the builder applied to a sample
        with the population means reproduces the population value exactly
    """
    a, b = _coefficient_arrays(pop, family)
    builder = SampleMeanBuilder(pop.weights, a, b, pop.stratum_ids)
    population = float(builder.stacked(pop.column("mean_x")))
    return population, builder


@dataclass(frozen=True)
class TransformDerived:
    mean_transformed: float
    ratio: float
    theta: float


def ratio_and_theta(pop: PopulationSummary, family: TransformFamily) -> TransformDerived:
    """
    R_ab = Ybar_st * (sum w_h a_h Xbar_h) / (Xbar_st,ab * Xbar_st)
    theta_ab = (sum w_h a_h Xbar_h) / Xbar_st,ab

    Raises:
        SingularTransformError: Xbar_st or Xbar_st,ab is zero
    """
    mean_ab, builder = transformed_means(pop, family)
    if pop.grand_mean_x == 0:
        raise SingularTransformError("population auxiliary mean Xbar_st is zero")
    if mean_ab == 0:
        raise SingularTransformError(f"transformed mean is zero for family {family.label}")

    scaled = float(stratified_sum(pop.weights, builder.a * pop.column("mean_x")))
    theta = scaled / mean_ab
    ratio = pop.grand_mean_y * scaled / (mean_ab * pop.grand_mean_x)
    logger.debug(f"{family.label}: Xbar_ab={mean_ab!r} R_ab={ratio!r} theta={theta!r}")
    return TransformDerived(mean_transformed=mean_ab, ratio=ratio, theta=theta)
