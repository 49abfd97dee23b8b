"""
Command-line front end.

    python -m stratexp analyze  --input data/table_6_1.yml
    python -m stratexp allocate --input data/table_6_1.yml --n 140
    python -m stratexp generate --input data/table_6_1.yml --seed 42 --output pop.csv
    python -m stratexp simulate --population pop.csv --design design.csv --reps 100000
    python -m stratexp validate --population pop.csv --design design.csv --method auto
    python -m stratexp estimate --input data/table_6_1.yml --sample sample.csv

Exit status is 0 on success, 1 for input problems and 2 for computation
problems; failures print a single ``error: <reason>`` line on stderr.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from stratexp import __description__, __version__
from stratexp.allocation import neyman_for_population
from stratexp.comparison import compare_all
from stratexp.config import Settings, configure_logging, load_config
from stratexp.errors import IngestError, InputError, StratexpError
from stratexp.estimators import EstimatorSpec, evaluate, parse_estimator
from stratexp.reporting import (
    NumberFormat,
    allocation_csv,
    estimates_csv,
    frame_csv,
    simulation_csv,
    theory_report_text,
    validation_csv,
)
from stratexp.simulate import ValidationMethod, generate_population, run_replications, validate
from stratexp.stats import (
    UNIT_HEADER,
    PopulationFrame,
    PopulationSummary,
    ingest_units,
    load_aggregated,
    load_design,
    load_sample,
    summarize_frame,
)
from stratexp.theory import full_report
from stratexp.transforms import NAMED_FAMILIES, TransformFamily, load_custom_family, parse_family

logger = logging.getLogger(__name__)

COMMANDS = ("analyze", "simulate", "allocate", "validate", "generate", "estimate")
DEFAULT_ESTIMATORS = "cr,t,t_sd,t_sk,t_us1,t_us2,t_gns1,t_gns2,t_mk_opt"


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors become InputError so they share the exit-code convention"""

    def error(self, message):
        raise InputError(message)


@dataclass(frozen=True)
class RunConfig:
    """One command with its inputs, after flags are merged over the config file"""

    command: str
    input: Optional[Path] = None
    population: Optional[Path] = None
    design: Optional[Path] = None
    sample: Optional[Path] = None
    custom: Optional[Path] = None
    output: Optional[Path] = None
    families: Tuple[str, ...] = ()
    estimators: Tuple[str, ...] = ()
    method: str = ValidationMethod.AUTO
    reps: int = 100_000
    seed: int = 42
    n: Optional[int] = None
    workers: int = 1
    budget: int = 10_000_000
    min_per_stratum: int = 1
    number_format: NumberFormat = field(default_factory=NumberFormat)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        required = {
            "analyze": ("input",),
            "allocate": ("input", "n"),
            "generate": ("input",),
            "estimate": ("input", "sample"),
            "simulate": ("population", "design"),
            "validate": ("population", "design"),
        }[self.command]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise InputError(f"{self.command} requires --{' --'.join(missing)}")


def _split(text: Optional[str]) -> Tuple[str, ...]:
    if not text:
        return ()
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _path(value: Optional[str]) -> Optional[Path]:
    return Path(value) if value else None


def build_run_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """Flags win over the config file, which wins over defaults"""
    sim = settings.simulation
    full_precision = bool(args.full_precision) or settings.report.full_precision
    return RunConfig(
        command=args.command,
        input=_path(getattr(args, "input", None)),
        population=_path(getattr(args, "population", None)),
        design=_path(getattr(args, "design", None)),
        sample=_path(getattr(args, "sample", None)),
        custom=_path(getattr(args, "custom", None)),
        output=_path(args.output),
        families=_split(getattr(args, "family", None)),
        estimators=_split(getattr(args, "estimators", None) or DEFAULT_ESTIMATORS),
        method=getattr(args, "method", None) or ValidationMethod.AUTO,
        reps=sim.replications if getattr(args, "reps", None) is None else args.reps,
        seed=sim.seed if getattr(args, "seed", None) is None else args.seed,
        n=getattr(args, "n", None),
        workers=sim.workers if args.workers is None else args.workers,
        budget=sim.enumeration_budget,
        min_per_stratum=settings.allocation.min_per_stratum,
        number_format=NumberFormat(settings.report.decimals, full_precision),
    )


# ============================================================================
# INPUT HELPERS
# ============================================================================

def is_unit_csv(path: Path) -> bool:
    """Unit CSVs start with the header ``stratum,y,x``; anything else is aggregated"""
    try:
        with open(path, "r", encoding="utf-8-sig") as f:
            first = f.readline()
    except UnicodeDecodeError as e:
        raise IngestError(f"{path} is not valid UTF-8 text (byte offset {e.start})") from e
    return tuple(first.strip().split(",")) == UNIT_HEADER


def load_population(path: Path, design_path: Optional[Path] = None) -> PopulationSummary:
    """Population summary from a unit CSV or an aggregated statistics file"""
    design = load_design(design_path) if design_path else None
    if is_unit_csv(path):
        return summarize_frame(ingest_units(path), design)
    pop = load_aggregated(path).population()
    return pop.with_design(design) if design else pop


def load_families(config: RunConfig) -> Optional[List[TransformFamily]]:
    """Families from --family and --custom; None keeps the default six"""
    families = [parse_family(name) for name in config.families]
    if config.custom:
        if not families:
            families = [TransformFamily.named(name) for name in NAMED_FAMILIES]
        families.append(load_custom_family(config.custom))
    return families or None


def parse_estimators(tokens: Sequence[str]) -> List[EstimatorSpec]:
    if not tokens:
        raise InputError("no estimators given")
    return [parse_estimator(token) for token in tokens]


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_analyze(config: RunConfig) -> str:
    pop = load_population(config.input, config.design)
    families = load_families(config)
    logger.info(f"Analyzing {len(pop.strata)} strata (N={pop.N}, n={pop.n})")
    report = full_report(pop, families)
    verdicts = compare_all(pop, families)
    return theory_report_text(report, verdicts, config.number_format)


def cmd_allocate(config: RunConfig) -> str:
    pop = load_population(config.input)
    result = neyman_for_population(pop, config.n, config.min_per_stratum)
    return allocation_csv(result, config.number_format)


def cmd_generate(config: RunConfig) -> str:
    targets = load_aggregated(config.input).strata
    frame = generate_population(targets, config.seed)
    logger.info(f"Generated {frame.size} units with seed {config.seed}")
    return frame_csv(frame)


def _frame_and_design(config: RunConfig) -> Tuple[PopulationFrame, dict]:
    return ingest_units(config.population), load_design(config.design)


def cmd_simulate(config: RunConfig) -> str:
    frame, design = _frame_and_design(config)
    specs = parse_estimators(config.estimators)
    report = run_replications(frame, design, specs, config.reps, config.seed, config.workers)
    return simulation_csv(report, config.number_format)


def cmd_validate(config: RunConfig) -> str:
    frame, design = _frame_and_design(config)
    specs = parse_estimators(config.estimators)
    rows = validate(frame, design, specs, method=config.method, reps=config.reps,
                    seed=config.seed, budget=config.budget, workers=config.workers)
    return validation_csv(rows, config.number_format)


def cmd_estimate(config: RunConfig) -> str:
    pop = load_population(config.input, config.design)
    sample = load_sample(config.sample, pop)
    specs = parse_estimators(config.estimators)
    return estimates_csv([(spec.name, evaluate(spec, sample, pop)) for spec in specs],
                         config.number_format)


HANDLERS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "allocate": cmd_allocate,
    "validate": cmd_validate,
    "generate": cmd_generate,
    "estimate": cmd_estimate,
}


# ============================================================================
# ARGUMENTS AND ENTRY POINT
# ============================================================================

def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to config file (default config/stratexp.yml)")
    common.add_argument("--output", help="Output file (stdout when absent)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--full-precision", action="store_true",
                        help="Shortest round-trip floats instead of fixed decimals")
    common.add_argument("--workers", type=int, help="Simulation threads")

    parser = ArgumentParser(prog="stratexp", description=__description__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    analyze = sub.add_parser("analyze", parents=[common],
                             help="Bias/MSE report and efficiency verdicts")
    analyze.add_argument("--input", help="Aggregated statistics file or unit CSV")
    analyze.add_argument("--design", help="Design CSV (stratum,n)")
    analyze.add_argument("--family", help="Comma-separated families (default: all six)")
    analyze.add_argument("--custom", help="Custom coefficients CSV (stratum,a,b)")

    allocate = sub.add_parser("allocate", parents=[common], help="Neyman allocation")
    allocate.add_argument("--input", help="Aggregated statistics file or unit CSV")
    allocate.add_argument("--n", type=int, help="Total sample size")

    generate = sub.add_parser("generate", parents=[common],
                              help="Moment-matched synthetic unit CSV")
    generate.add_argument("--input", help="Aggregated statistics file")
    generate.add_argument("--seed", type=int)

    for name, text in (("simulate", "Monte Carlo bias/MSE"),
                       ("validate", "Theoretical vs exact or simulated MSE")):
        command = sub.add_parser(name, parents=[common], help=text)
        command.add_argument("--population", help="Unit CSV (stratum,y,x)")
        command.add_argument("--design", help="Design CSV (stratum,n)")
        command.add_argument("--estimators", help=f"Comma-separated (default {DEFAULT_ESTIMATORS})")
        command.add_argument("--reps", type=int)
        command.add_argument("--seed", type=int)
        if name == "validate":
            command.add_argument("--method", choices=ValidationMethod.ALL)

    estimate = sub.add_parser("estimate", parents=[common], help="Point estimates from a sample")
    estimate.add_argument("--input", help="Aggregated statistics file or unit CSV")
    estimate.add_argument("--design", help="Design CSV (stratum,n)")
    estimate.add_argument("--sample", help="Sample CSV (stratum,n,mean_y,mean_x or stratum,y,x)")
    estimate.add_argument("--estimators", help=f"Comma-separated (default {DEFAULT_ESTIMATORS})")
    return parser


def write_output(text: str, output: Optional[Path]):
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Wrote {output}")


def _fail(message: str, code: int) -> int:
    reason = " ".join(str(message).split())
    print(f"error: {reason}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise InputError(f"a command is required ({', '.join(COMMANDS)})")
        settings = load_config(args.config)
        configure_logging(settings.logging, args.log_level)
        config = build_run_config(args, settings)

        logger.info(f"Starting {config.command}")
        text = HANDLERS[config.command](config)
        write_output(text, config.output)
        logger.info(f"Finished {config.command}")
        return 0
    except StratexpError as e:
        return _fail(str(e), e.exit_code)
    except OSError as e:
        return _fail(f"{e.strerror or e}: {e.filename}" if e.filename else str(e), 1)


if __name__ == "__main__":
    sys.exit(main())
