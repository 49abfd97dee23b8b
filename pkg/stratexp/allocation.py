"""
Neyman allocation of a total sample size across strata.

n_h is proportional to N_h * S_h, with S_h the study-variable standard
deviation. Raw shares are rounded to the nearest integer and then repaired by
largest remainder so that they add up to n while staying within
[min_per_stratum, N_h].
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from stratexp.errors import AllocationError, DuplicateStratumError, InputError
from stratexp.stats import PopulationSummary, stratum_sort_key

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StratumAllocation:
    stratum_id: str
    raw: float
    allocated: int


@dataclass(frozen=True)
class AllocationResult:
    strata: Tuple[StratumAllocation, ...]
    n: int

    def as_design(self) -> Dict[str, int]:
        """stratum_id -> n_h, the form PopulationSummary.with_design takes"""
        return {s.stratum_id: s.allocated for s in self.strata}

    def allocated(self) -> Tuple[int, ...]:
        return tuple(s.allocated for s in self.strata)


def _repair(alloc: np.ndarray, raw: np.ndarray, lower: int, upper: np.ndarray, n: int):
    """Move single units until sum(alloc) == n; ties go to the earlier stratum"""
    while alloc.sum() < n:
        gap = np.where(alloc < upper, raw - alloc, -np.inf)
        alloc[int(np.argmax(gap))] += 1
    while alloc.sum() > n:
        excess = np.where(alloc > lower, alloc - raw, -np.inf)
        alloc[int(np.argmax(excess))] -= 1


def neyman(pop_sizes: Sequence[Tuple[str, int, float]], n: int,
           min_per_stratum: int = 1) -> AllocationResult:
    """
    Neyman allocation.

    Args:
        pop_sizes: (stratum_id, N_h, S_h) per stratum, any order
        n: Total sample size
        min_per_stratum: Floor applied to every stratum

    Returns:
        AllocationResult in ascending stratum order

    Raises:
        AllocationError: all S_h are zero, n is below the per-stratum floor
            total or above the population size
        InputError: n or min_per_stratum is not a usable integer
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InputError(f"total sample size n must be a positive integer, got {n!r}")
    if isinstance(min_per_stratum, bool) or int(min_per_stratum) != min_per_stratum \
            or min_per_stratum < 0:
        raise InputError(f"min_per_stratum must be a non-negative integer, got {min_per_stratum!r}")
    n = int(n)
    min_per_stratum = int(min_per_stratum)

    entries = sorted(((str(sid), int(N_h), float(S_h)) for sid, N_h, S_h in pop_sizes),
                     key=lambda e: stratum_sort_key(e[0]))
    if not entries:
        raise AllocationError("no strata to allocate")
    ids = [e[0] for e in entries]
    if len(set(ids)) != len(ids):
        raise DuplicateStratumError("duplicate stratum id in allocation input")

    sizes = np.array([e[1] for e in entries], dtype=float)
    spreads = np.array([e[2] for e in entries], dtype=float)
    if np.any(sizes < 1):
        raise AllocationError("every stratum needs N_h >= 1")
    if np.any(~np.isfinite(spreads)) or np.any(spreads < 0):
        raise AllocationError("standard deviations must be finite and non-negative")
    too_small = [sid for sid, N_h in zip(ids, sizes) if N_h < min_per_stratum]
    if too_small:
        raise AllocationError(
            f"min_per_stratum={min_per_stratum} exceeds N_h in stratum(s) {', '.join(too_small)}"
        )

    strata_count = len(entries)
    if n < min_per_stratum * strata_count:
        raise AllocationError(
            f"n={n} cannot give {min_per_stratum} unit(s) to each of {strata_count} strata"
        )
    if n > sizes.sum():
        raise AllocationError(f"n={n} exceeds the population size {int(sizes.sum())}")

    products = sizes * spreads
    total = float(products.sum())
    if total == 0:
        raise AllocationError("Neyman allocation undefined: every S_h is zero")

    raw = n * products / total
    alloc = np.floor(raw + 0.5).astype(np.int64)
    upper = sizes.astype(np.int64)
    clamped = np.clip(alloc, min_per_stratum, upper)
    if np.any(clamped != alloc):
        logger.info("Allocation clamped to [min_per_stratum, N_h]; redistributing")
    alloc = clamped
    _repair(alloc, raw, min_per_stratum, upper, n)

    if min(alloc) < 2:
        logger.warning("Some strata get fewer than 2 units; within-stratum variances "
                       "cannot be estimated from such a sample")
    logger.info(f"Neyman allocation of n={n}: {', '.join(str(int(a)) for a in alloc)}")
    return AllocationResult(
        tuple(StratumAllocation(sid, float(r), int(a)) for sid, r, a in zip(ids, raw, alloc)),
        int(n),
    )


def neyman_for_population(pop: PopulationSummary, n: int,
                          min_per_stratum: int = 1) -> AllocationResult:
    """Neyman allocation driven by each stratum's S_yh"""
    return neyman([(s.stratum_id, s.N_h, s.sd_y) for s in pop.strata], n, min_per_stratum)
