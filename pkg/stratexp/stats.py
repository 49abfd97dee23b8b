"""
Population and sample statistics for stratified designs.

Holds the immutable data types every other module works on (stratum and
population summaries, unit frames, sample summaries), ingestion of unit CSV files,
aggregated statistics documents, design and sample files, and the computation of
stratum-level summary statistics.

Conventions:
    - variances and covariances use divisor N_h - 1
    - kurtosis beta2x = m4 / m2**2 with central moments over divisor N_h
    - accumulations run over strata in ascending stratum order
"""

import io
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from scipy import stats as scipy_stats

from stratexp.errors import (
    DegenerateStratumError,
    DesignError,
    DuplicateStratumError,
    IngestError,
    SummaryError,
    UndefinedCoefficientError,
    ZeroVarianceError,
)

logger = logging.getLogger(__name__)

UNIT_HEADER = ("stratum", "y", "x")
DESIGN_HEADER = ("stratum", "n")
SAMPLE_SUMMARY_HEADER = ("stratum", "n", "mean_y", "mean_x")

COV_RHO_TOLERANCE = 1e-9

Source = Union[str, Path, TextIO]


def stratum_sort_key(stratum_id: str) -> Tuple[int, Union[int, str]]:
    """Digit-only labels sort numerically and first; others lexicographically"""
    label = str(stratum_id)
    if label.isdigit():
        return (0, int(label))
    return (1, label)


def stratified_sum(weights: Sequence[float], values: Sequence) -> Union[float, np.ndarray]:
    """
    Sum w_h * v_h in stratum order.

    ``values`` may hold scalars or equally-shaped arrays (one per stratum); the
    explicit loop keeps scalar and vectorized evaluations bit-identical.
    """
    total = 0.0
    for w, v in zip(weights, values):
        total = total + w * v
    return total


# ============================================================================
# DOMAIN TYPES
# ============================================================================

@dataclass(frozen=True)
class StratumSummary:
    """Population statistics of one stratum (plus its design sample size)"""

    stratum_id: str
    N_h: int
    n_h: int
    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    rho: float
    cov_xy: float
    cx: Optional[float] = None
    beta2x: Optional[float] = None

    def __post_init__(self):
        sid = self.stratum_id
        if self.N_h < 1 or self.n_h < 1:
            raise SummaryError(f"stratum {sid}: N_h and n_h must be positive")
        if self.n_h > self.N_h:
            raise SummaryError(f"stratum {sid}: n_h={self.n_h} exceeds N_h={self.N_h}")
        if self.sd_x < 0 or self.sd_y < 0:
            raise SummaryError(f"stratum {sid}: standard deviations must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise SummaryError(f"stratum {sid}: rho={self.rho} outside [-1, 1]")
        if self.cx is not None and self.cx < 0:
            raise SummaryError(f"stratum {sid}: cx must be non-negative")

        implied = self.rho * self.sd_y * self.sd_x
        scale = max(abs(self.cov_xy), abs(implied))
        if abs(self.cov_xy - implied) > COV_RHO_TOLERANCE * scale:
            raise SummaryError(
                f"stratum {sid}: cov_xy={self.cov_xy} inconsistent with "
                f"rho*sd_y*sd_x={implied}"
            )

    @classmethod
    def from_moments(cls, stratum_id, N_h: int, n_h: int, mean_x: float, mean_y: float,
                     sd_x: float, sd_y: float, rho: Optional[float] = None,
                     cov_xy: Optional[float] = None, cx: Optional[float] = None,
                     beta2x: Optional[float] = None) -> "StratumSummary":
        """
        Build a summary from aggregated moments.

        cov_xy wins when both are given (rho is then validated against it); with
        only rho, cov_xy := rho * sd_y * sd_x.
        """
        if rho is None and cov_xy is None:
            raise SummaryError(f"stratum {stratum_id}: one of rho or cov_xy is required")
        if cov_xy is None:
            cov_xy = rho * sd_y * sd_x
        elif rho is None:
            if sd_x == 0 or sd_y == 0:
                raise ZeroVarianceError(f"stratum {stratum_id}: rho undefined with zero variance")
            rho = cov_xy / (sd_x * sd_y)
        return cls(
            stratum_id=str(stratum_id), N_h=int(N_h), n_h=int(n_h),
            mean_x=float(mean_x), mean_y=float(mean_y),
            sd_x=float(sd_x), sd_y=float(sd_y),
            rho=float(rho), cov_xy=float(cov_xy),
            cx=None if cx is None else float(cx),
            beta2x=None if beta2x is None else float(beta2x),
        )

    @property
    def gamma(self) -> float:
        return 1.0 / self.n_h - 1.0 / self.N_h


@dataclass(frozen=True, eq=False)
class PopulationSummary:
    """Ordered strata plus weights w_h = N_h/N, gammas and grand means"""

    strata: Tuple[StratumSummary, ...]
    weights: np.ndarray = field(repr=False)
    gammas: np.ndarray = field(repr=False)
    grand_mean_x: float
    grand_mean_y: float

    @property
    def N(self) -> int:
        return sum(s.N_h for s in self.strata)

    @property
    def n(self) -> int:
        return sum(s.n_h for s in self.strata)

    @property
    def stratum_ids(self) -> Tuple[str, ...]:
        return tuple(s.stratum_id for s in self.strata)

    def column(self, name: str) -> np.ndarray:
        """Per-stratum attribute as a read-only float array"""
        values = np.array([getattr(s, name) for s in self.strata], dtype=float)
        values.setflags(write=False)
        return values

    def design_weights(self) -> np.ndarray:
        """w_h^2 * gamma_h, the common factor of every first-order moment"""
        values = self.weights ** 2 * self.gammas
        values.setflags(write=False)
        return values

    def with_design(self, design: Mapping[str, int]) -> "PopulationSummary":
        """Same population under other sample sizes"""
        check_design_ids(design, self.stratum_ids)
        strata = [
            replace(s, n_h=int(design[s.stratum_id]))
            for s in self.strata
        ]
        return summarize_population(strata)


@dataclass(frozen=True, eq=False)
class PopulationFrame:
    """
    Unit-level population records (stratum, y, x).

    ``units`` keeps input row order; treat it as read-only.
    """

    units: pd.DataFrame = field(repr=False)

    def __post_init__(self):
        counts = self.units.groupby("stratum", sort=False).size()
        small = [str(s) for s, c in counts.items() if c < 2]
        if small:
            raise DegenerateStratumError(
                f"strata with fewer than 2 units: {', '.join(small)}"
            )

    @property
    def stratum_ids(self) -> Tuple[str, ...]:
        labels = pd.unique(self.units["stratum"])
        return tuple(sorted((str(s) for s in labels), key=stratum_sort_key))

    @property
    def size(self) -> int:
        return len(self.units)

    def stratum_values(self, stratum_id: str) -> Tuple[np.ndarray, np.ndarray]:
        """(y, x) arrays of one stratum, in input order"""
        mask = self.units["stratum"] == stratum_id
        if not mask.any():
            raise DesignError(f"unknown stratum: {stratum_id}")
        y = self.units.loc[mask, "y"].to_numpy(dtype=float, copy=True)
        x = self.units.loc[mask, "x"].to_numpy(dtype=float, copy=True)
        y.setflags(write=False)
        x.setflags(write=False)
        return y, x

    def stratum_sizes(self) -> Dict[str, int]:
        return {sid: int((self.units["stratum"] == sid).sum()) for sid in self.stratum_ids}


@dataclass(frozen=True)
class SampleStratum:
    stratum_id: str
    n_h: int
    mean_y: float
    mean_x: float


@dataclass(frozen=True)
class SampleData:
    """Per-stratum sample means, ordered like the population summary"""

    strata: Tuple[SampleStratum, ...]

    @classmethod
    def for_population(cls, pop: PopulationSummary,
                       records: Iterable[SampleStratum]) -> "SampleData":
        """Order records like ``pop`` and check the stratum sets agree"""
        by_id = {}
        for rec in records:
            if rec.stratum_id in by_id:
                raise DesignError(f"duplicate sample stratum: {rec.stratum_id}")
            by_id[rec.stratum_id] = rec
        expected = set(pop.stratum_ids)
        if set(by_id) != expected:
            missing = sorted(expected - set(by_id), key=stratum_sort_key)
            extra = sorted(set(by_id) - expected, key=stratum_sort_key)
            raise DesignError(
                f"sample strata differ from population (missing: {missing}, unknown: {extra})"
            )
        return cls(tuple(by_id[sid] for sid in pop.stratum_ids))

    def means_y(self) -> np.ndarray:
        return np.array([s.mean_y for s in self.strata], dtype=float)

    def means_x(self) -> np.ndarray:
        return np.array([s.mean_x for s in self.strata], dtype=float)

    @property
    def stratum_ids(self) -> Tuple[str, ...]:
        return tuple(s.stratum_id for s in self.strata)

    def check_strata(self, stratum_ids: Sequence[str]):
        """
        Raises:
            DesignError: sample strata differ from ``stratum_ids`` or are out of order
        """
        if self.stratum_ids != tuple(stratum_ids):
            raise DesignError(
                f"sample strata {list(self.stratum_ids)} do not match population strata "
                f"{list(stratum_ids)}"
            )

    def mean_y_st(self, pop: PopulationSummary) -> float:
        """ybar_st = sum w_h ybar_h"""
        self.check_strata(pop.stratum_ids)
        return float(stratified_sum(pop.weights, self.means_y()))

    def mean_x_st(self, pop: PopulationSummary) -> float:
        """xbar_st = sum w_h xbar_h"""
        self.check_strata(pop.stratum_ids)
        return float(stratified_sum(pop.weights, self.means_x()))


@dataclass(frozen=True)
class AggregatedInput:
    """Parsed aggregated statistics document"""

    strata: Tuple[StratumSummary, ...]
    overall: Mapping[str, object] = field(default_factory=dict)

    def population(self) -> PopulationSummary:
        return summarize_population(list(self.strata))


# ============================================================================
# INGESTION
# ============================================================================

def read_text(source: Source) -> str:
    """
    Whole text of a path or stream; a leading UTF-8 byte order mark is dropped.

    Raises:
        IngestError: the file is not valid UTF-8
    """
    try:
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8-sig") as f:
                return f.read()
        return source.read().lstrip("\ufeff")
    except UnicodeDecodeError as e:
        name = source if isinstance(source, (str, Path)) else "input"
        raise IngestError(f"{name} is not valid UTF-8 text (byte offset {e.start})") from e


def read_csv_table(text: str, header: Sequence[str], what: str) -> pd.DataFrame:
    """Read a small CSV as strings, enforcing the exact header"""
    if not text.strip():
        raise IngestError(f"empty {what} input")
    try:
        df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False,
                         skipinitialspace=False)
    except pd.errors.EmptyDataError as e:
        raise IngestError(f"empty {what} input") from e
    except pd.errors.ParserError as e:
        match = re.search(r"Expected (\d+) fields in line (\d+), saw (\d+)", str(e))
        if match:
            expected, line, seen = match.groups()
            raise IngestError(f"wrong number of fields in {what}: expected {expected}, saw {seen}",
                              line=int(line)) from e
        raise IngestError(f"malformed {what}: {e}") from e

    if tuple(df.columns) != tuple(header):
        raise IngestError(f"{what} header must be exactly '{','.join(header)}'", line=1)
    if df.empty:
        raise IngestError(f"empty {what} input: no data rows")
    return df


def numeric_column(df: pd.DataFrame, column: str, what: str) -> pd.Series:
    """Convert a string column; the first bad row is reported by file line"""
    values = pd.to_numeric(df[column], errors="coerce").astype(float)
    bad = ~np.isfinite(values.to_numpy())
    if bad.any():
        position = int(np.flatnonzero(bad)[0])
        raw = df[column].iloc[position]
        raise IngestError(f"non-numeric {column} value {raw!r} in {what}", line=position + 2)
    return values


def check_labels(df: pd.DataFrame, what: str):
    labels = df["stratum"]
    missing = labels.isna() | (labels.astype(str).str.len() == 0)
    if missing.any():
        position = int(np.flatnonzero(missing.to_numpy())[0])
        raise IngestError(f"missing stratum label in {what}", line=position + 2)


def ingest_units(source: Source) -> PopulationFrame:
    """
    Read a unit CSV (header ``stratum,y,x``) into a PopulationFrame.

    Stratum labels are kept verbatim and row order is preserved.
    """
    df = read_csv_table(read_text(source), UNIT_HEADER, "unit CSV")
    check_labels(df, "unit CSV")
    units = pd.DataFrame({
        "stratum": df["stratum"].astype(str),
        "y": numeric_column(df, "y", "unit CSV"),
        "x": numeric_column(df, "x", "unit CSV"),
    })
    frame = PopulationFrame(units)
    logger.info(f"Ingested {frame.size} units in {len(frame.stratum_ids)} strata")
    return frame


def load_design(source: Source) -> Dict[str, int]:
    """Read a design CSV (header ``stratum,n``)"""
    df = read_csv_table(read_text(source), DESIGN_HEADER, "design CSV")
    check_labels(df, "design CSV")
    sizes = numeric_column(df, "n", "design CSV")
    design: Dict[str, int] = {}
    for position, (label, n_h) in enumerate(zip(df["stratum"], sizes)):
        if n_h != int(n_h) or n_h < 1:
            raise IngestError(f"sample size must be a positive integer, got {n_h}",
                              line=position + 2)
        if label in design:
            raise IngestError(f"duplicate stratum {label}", line=position + 2)
        design[str(label)] = int(n_h)
    return design


def load_sample(source: Source, pop: PopulationSummary) -> SampleData:
    """
    Read sample data: either per-stratum means (``stratum,n,mean_y,mean_x``) or
    the sampled units themselves (``stratum,y,x``).
    """
    text = read_text(source)
    header = tuple(text.lstrip().splitlines()[0].strip().split(",")) if text.strip() else ()

    if header == UNIT_HEADER:
        df = read_csv_table(text, UNIT_HEADER, "sample CSV")
        check_labels(df, "sample CSV")
        units = pd.DataFrame({
            "stratum": df["stratum"].astype(str),
            "y": numeric_column(df, "y", "sample CSV"),
            "x": numeric_column(df, "x", "sample CSV"),
        })
        grouped = units.groupby("stratum", sort=False)
        records = [
            SampleStratum(str(sid), int(len(g)), float(g["y"].mean()), float(g["x"].mean()))
            for sid, g in grouped
        ]
    else:
        df = read_csv_table(text, SAMPLE_SUMMARY_HEADER, "sample CSV")
        check_labels(df, "sample CSV")
        sizes = numeric_column(df, "n", "sample CSV")
        mean_y = numeric_column(df, "mean_y", "sample CSV")
        mean_x = numeric_column(df, "mean_x", "sample CSV")
        records = [
            SampleStratum(str(sid), int(n), float(my), float(mx))
            for sid, n, my, mx in zip(df["stratum"], sizes, mean_y, mean_x)
        ]
    return SampleData.for_population(pop, records)


_REQUIRED_AGGREGATED = ("id", "N", "n", "mean_x", "mean_y", "sd_x", "sd_y")
_OPTIONAL_AGGREGATED = ("rho", "cov_xy", "cx", "beta2x")


def load_aggregated(source: Source) -> AggregatedInput:
    """
    Read an aggregated statistics document (YAML or JSON).

    Top-level ``strata`` is a list of objects with fields id, N, n, mean_x,
    mean_y, sd_x, sd_y and optional rho, cov_xy, cx, beta2x. An optional
    top-level ``population`` block of overall statistics is kept but unused.
    """
    try:
        doc = yaml.safe_load(read_text(source))
    except yaml.YAMLError as e:
        raise IngestError(f"cannot parse aggregated statistics: {e}") from e

    if not isinstance(doc, dict) or not isinstance(doc.get("strata"), list) or not doc["strata"]:
        raise IngestError("aggregated statistics need a non-empty top-level 'strata' list")

    summaries = []
    for index, entry in enumerate(doc["strata"]):
        if not isinstance(entry, dict):
            raise IngestError(f"strata[{index}] must be a mapping")
        missing = [k for k in _REQUIRED_AGGREGATED if entry.get(k) is None]
        if missing:
            raise IngestError(f"strata[{index}] missing required field(s): {', '.join(missing)}")
        try:
            numeric = {k: float(entry[k]) for k in _REQUIRED_AGGREGATED[1:]}
            optional = {k: float(entry[k]) for k in _OPTIONAL_AGGREGATED
                        if entry.get(k) is not None}
        except (TypeError, ValueError) as e:
            raise IngestError(f"strata[{index}] has a non-numeric field: {e}") from e
        bad = [k for k, v in {**numeric, **optional}.items() if not math.isfinite(v)]
        if bad:
            raise IngestError(f"strata[{index}] has non-finite value(s) for: {', '.join(bad)}")
        for key in ("N", "n"):
            if numeric[key] != int(numeric[key]):
                raise IngestError(f"strata[{index}].{key} must be an integer")

        summaries.append(StratumSummary.from_moments(
            stratum_id=str(entry["id"]),
            N_h=int(numeric["N"]), n_h=int(numeric["n"]),
            mean_x=numeric["mean_x"], mean_y=numeric["mean_y"],
            sd_x=numeric["sd_x"], sd_y=numeric["sd_y"],
            **optional,
        ))

    overall = doc.get("population") or {}
    if overall:
        logger.debug(f"Overall-level statistics accepted but unused: {sorted(overall)}")
    return AggregatedInput(tuple(summaries), dict(overall))


# ============================================================================
# SUMMARY STATISTICS
# ============================================================================

def summarize_stratum(frame: PopulationFrame, stratum_id: str, n_h: int) -> StratumSummary:
    """
    Population statistics of one stratum of a unit frame.

    Args:
        frame: Unit-level population
        stratum_id: Stratum label
        n_h: Design sample size for the stratum

    Returns:
        StratumSummary with divisor N_h - 1 dispersions and divisor N_h kurtosis
    """
    y, x = frame.stratum_values(stratum_id)
    N_h = len(y)
    if N_h < 2:
        raise DegenerateStratumError(f"stratum {stratum_id}: fewer than 2 units")
    if not 1 <= n_h <= N_h:
        raise DesignError(f"stratum {stratum_id}: n_h={n_h} outside [1, {N_h}]")

    mean_x = float(np.mean(x))
    mean_y = float(np.mean(y))
    dx = x - mean_x
    dy = y - mean_y
    var_x = float(np.sum(dx * dx)) / (N_h - 1)
    var_y = float(np.sum(dy * dy)) / (N_h - 1)
    cov_xy = float(np.sum(dx * dy)) / (N_h - 1)

    if var_x == 0 or var_y == 0:
        raise ZeroVarianceError(f"stratum {stratum_id}: zero variance, rho undefined")
    if mean_x == 0:
        raise UndefinedCoefficientError(f"stratum {stratum_id}: mean_x = 0, cx undefined")

    sd_x = math.sqrt(var_x)
    sd_y = math.sqrt(var_y)
    rho = cov_xy / (sd_x * sd_y)
    # Cauchy-Schwarz can be exceeded by one ulp
    rho = min(1.0, max(-1.0, rho))
    beta2x = float(scipy_stats.kurtosis(x, fisher=False, bias=True))

    return StratumSummary(
        stratum_id=str(stratum_id), N_h=N_h, n_h=int(n_h),
        mean_x=mean_x, mean_y=mean_y, sd_x=sd_x, sd_y=sd_y,
        rho=rho, cov_xy=cov_xy,
        cx=sd_x / abs(mean_x), beta2x=beta2x,
    )


def summarize_population(summaries: List[StratumSummary]) -> PopulationSummary:
    """
    Weights, gammas and grand means of a stratified population.

    Output order is ascending by stratum id whatever the input order.
    """
    if not summaries:
        raise SummaryError("at least one stratum is required")
    seen = set()
    for s in summaries:
        if s.stratum_id in seen:
            raise DuplicateStratumError(f"duplicate stratum id: {s.stratum_id}")
        seen.add(s.stratum_id)

    strata = tuple(sorted(summaries, key=lambda s: stratum_sort_key(s.stratum_id)))
    sizes = np.array([s.N_h for s in strata], dtype=float)
    weights = sizes / float(sum(s.N_h for s in strata))
    gammas = np.array([s.gamma for s in strata], dtype=float)
    weights.setflags(write=False)
    gammas.setflags(write=False)

    grand_mean_x = float(stratified_sum(weights, [s.mean_x for s in strata]))
    grand_mean_y = float(stratified_sum(weights, [s.mean_y for s in strata]))
    return PopulationSummary(strata, weights, gammas, grand_mean_x, grand_mean_y)


def check_design_ids(design: Mapping[str, int], stratum_ids: Sequence[str]):
    unknown = sorted(set(design) - set(stratum_ids), key=stratum_sort_key)
    missing = sorted(set(stratum_ids) - set(design), key=stratum_sort_key)
    if unknown:
        raise DesignError(f"unknown stratum in design: {', '.join(unknown)}")
    if missing:
        raise DesignError(f"design lacks stratum: {', '.join(missing)}")


def summarize_frame(frame: PopulationFrame,
                    design: Optional[Mapping[str, int]] = None) -> PopulationSummary:
    """Summaries of every stratum under ``design`` (census when None)"""
    if design is None:
        logger.warning("No design given; treating every stratum as a census (n_h = N_h)")
        design = frame.stratum_sizes()
    check_design_ids(design, frame.stratum_ids)
    return summarize_population([
        summarize_stratum(frame, sid, int(design[sid])) for sid in frame.stratum_ids
    ])
