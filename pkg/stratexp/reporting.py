"""
Serialization of reports to CSV text.

Numbers are written with a fixed number of decimals (4 by default) or, with
full precision, as the shortest string that round-trips to the same float.
Line endings are always ``\\n``.
"""

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import pandas as pd

from stratexp.allocation import AllocationResult
from stratexp.comparison import EfficiencyVerdict
from stratexp.simulate import SimulationReport, ValidationRow
from stratexp.stats import PopulationFrame
from stratexp.theory import TheoreticalReport


@dataclass(frozen=True)
class NumberFormat:
    decimals: int = 4
    full_precision: bool = False

    def __call__(self, value: float) -> str:
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if self.full_precision:
            return repr(value)
        text = f"{value:.{self.decimals}f}"
        # no "-0.0000"
        if text.startswith("-") and float(text) == 0:
            text = text[1:]
        return text


FULL_PRECISION = NumberFormat(full_precision=True)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    """CSV text of pre-formatted string cells"""
    table = pd.DataFrame([list(r) for r in rows], columns=list(header), dtype=str)
    buffer = io.StringIO()
    table.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


# ============================================================================
# REPORTS
# ============================================================================

def theory_report_text(report: TheoreticalReport, verdicts: Sequence[EfficiencyVerdict],
                       fmt: NumberFormat) -> str:
    """
    The analyze report: estimator rows, scalar lines, the verdict block and
    footnotes, separated by blank lines.
    """
    parts = [to_csv(("estimator", "bias", "mse"),
                    [(r.estimator, fmt(r.bias), fmt(r.mse)) for r in report.rows])]
    parts.append(
        f"alpha_opt={fmt(report.alpha_opt)}\n"
        f"rho_c_sq={fmt(report.rho_c_squared)}\n"
        f"mse_mk_min={fmt(report.mse_mk_min)}\n"
    )
    if verdicts:
        parts.append(to_csv(
            ("family", "A", "B", "threshold", "branch", "decision"),
            [(v.family, fmt(v.A), fmt(v.B), fmt(v.threshold), v.branch.value, v.decision.value)
             for v in verdicts],
        ))
    if report.footnotes:
        parts.append("".join(f"# note: {note}\n" for note in report.footnotes))
    return "\n".join(parts)


def simulation_csv(report: SimulationReport, fmt: NumberFormat) -> str:
    header = ("estimator", "empirical_mean", "empirical_bias", "empirical_mse", "mse_se",
              "theoretical_bias", "theoretical_mse", "replications", "seed")
    return to_csv(header, [
        (r.estimator, fmt(r.empirical_mean), fmt(r.empirical_bias), fmt(r.empirical_mse),
         fmt(r.mse_se), fmt(r.theoretical_bias), fmt(r.theoretical_mse),
         str(r.replications), str(r.seed))
        for r in report.rows
    ])


def validation_csv(rows: Sequence[ValidationRow], fmt: NumberFormat) -> str:
    return to_csv(("estimator", "theoretical_mse", "empirical_mse", "rel_error"), [
        (r.estimator, fmt(r.theoretical_mse), fmt(r.empirical_mse), fmt(r.rel_error))
        for r in rows
    ])


def allocation_csv(result: AllocationResult, fmt: NumberFormat) -> str:
    return to_csv(("stratum", "raw", "allocated"),
                  [(s.stratum_id, fmt(s.raw), str(s.allocated)) for s in result.strata])


def estimates_csv(estimates: Sequence[Tuple[str, float]], fmt: NumberFormat) -> str:
    return to_csv(("estimator", "estimate"), [(name, fmt(value)) for name, value in estimates])


def frame_csv(frame: PopulationFrame) -> str:
    """Unit CSV (``stratum,y,x``) with round-trip precision"""
    units = frame.units
    return to_csv(("stratum", "y", "x"), [
        (str(sid), repr(float(y)), repr(float(x)))
        for sid, y, x in zip(units["stratum"], units["y"], units["x"])
    ])
