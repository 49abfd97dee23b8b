#!/usr/bin/env python3
"""
Reproduce the published MSE table from the published stratum statistics.

Prints computed against published MSE values, the family ratios and the
Neyman allocation, flagging the rows that cannot match.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from stratexp.allocation import neyman_for_population
from stratexp.errors import StratexpError
from stratexp.stats import load_aggregated
from stratexp.theory import full_report, population_ratio
from stratexp.transforms import NAMED_FAMILIES, TransformFamily, ratio_and_theta

PUBLISHED_MSE = {
    "t": 359619.594,
    "t_SD": 359649.688,
    "t_SK": 359890.313,
    "t_US1": 359739.875,
    "t_US2": 359830.125,
    "t_GNS1": 360007.985,
    "t_GNS2": 360479.192,
    "t_MK(opt)": 218374.8898,
}

PUBLISHED_RATIO = {
    "R": 0.07793, "SD": 0.07792, "SK": 0.07784, "US1": 0.07789,
    "US2": 0.07786, "GNS1": 0.06632, "GNS2": 0.07765,
}

PUBLISHED_ALLOCATION = (9, 17, 38, 67, 7, 2)

KNOWN_MISMATCH = {
    "t_US1": "published R_US1 equals the US2 transform; computed R_US1 is ~R",
    "t_GNS1": "published GNS ratios do not follow from the published statistics",
    "t_GNS2": "published GNS ratios do not follow from the published statistics",
    "t_MK(opt)": "rounded inputs; within 10% expected",
}

DEFAULT_INPUT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                             "data", "table_6_1.yml")


def reproduce(input_file, n_total):
    """Print the side-by-side reproduction report."""
    pop = load_aggregated(input_file).population()
    report = full_report(pop)

    print(f"{'estimator':<12}{'computed':>16}{'published':>16}{'rel.diff':>10}  note")
    for row in report.rows:
        published = PUBLISHED_MSE.get(row.estimator)
        diff = abs(row.mse - published) / published if published else float("nan")
        note = KNOWN_MISMATCH.get(row.estimator, "")
        print(f"{row.estimator:<12}{row.mse:>16.3f}{published:>16.3f}{diff:>10.4f}  {note}")

    print(f"\nalpha_opt = {report.alpha_opt:.4f}   rho_c^2 = {report.rho_c_squared:.4f}")

    print(f"\n{'ratio':<8}{'computed':>12}{'published':>12}")
    print(f"{'R':<8}{population_ratio(pop):>12.5f}{PUBLISHED_RATIO['R']:>12.5f}")
    for name in NAMED_FAMILIES:
        family = TransformFamily.named(name)
        ratio = ratio_and_theta(pop, family).ratio
        print(f"{family.label:<8}{ratio:>12.5f}{PUBLISHED_RATIO[family.label]:>12.5f}")

    allocation = neyman_for_population(pop, n_total).allocated()
    status = "matches" if allocation == PUBLISHED_ALLOCATION else "DIFFERS from"
    print(f"\nNeyman allocation (n={n_total}): {allocation} {status} {PUBLISHED_ALLOCATION}")

    print()
    for note in report.footnotes:
        print(f"note: {note}")


def main():
    parser = argparse.ArgumentParser(description="Reproduce the published MSE table")
    parser.add_argument("--input", default=DEFAULT_INPUT, help="Aggregated statistics file")
    parser.add_argument("--n", type=int, default=140, help="Total sample size for allocation")
    args = parser.parse_args()

    try:
        reproduce(args.input, args.n)
    except StratexpError as e:
        print(f"Error: {e}")
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
