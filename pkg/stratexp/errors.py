"""
Exception hierarchy for stratexp.

Library code raises these; only the command-line front end turns them into an
``error:`` line and an exit status (1 for input problems, 2 for computation
problems).
"""

from typing import Optional


class StratexpError(Exception):
    """Base class for every error raised by the package"""

    exit_code = 2


# ============================================================================
# INPUT ERRORS (exit 1)
# ============================================================================

class InputError(StratexpError):
    """Bad or incomplete input data, configuration or design"""

    exit_code = 1


class IngestError(InputError):
    """Malformed unit CSV / aggregated statistics file"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(InputError):
    pass


class DesignError(InputError):
    """Sample design does not fit the population (unknown strata, n_h > N_h, ...)"""


class SummaryError(InputError):
    pass


class DegenerateStratumError(SummaryError):
    pass


class ZeroVarianceError(SummaryError):
    pass


class UndefinedCoefficientError(SummaryError):
    pass


class DuplicateStratumError(SummaryError):
    pass


class TransformConfigError(InputError):
    """A transformation family needs an auxiliary constant the input lacks"""

    def __init__(self, family: str, field: str, stratum_id: Optional[str] = None):
        self.family = family
        self.field = field
        self.stratum_id = stratum_id
        where = f" (stratum {stratum_id})" if stratum_id is not None else ""
        super().__init__(f"family {family} requires {field}{where}")


# ============================================================================
# COMPUTATION ERRORS (exit 2)
# ============================================================================

class ComputationError(StratexpError):
    exit_code = 2


class SingularTransformError(ComputationError):
    pass


class EstimationError(ComputationError):
    pass


class DegenerateDesignError(ComputationError):
    pass


class AllocationError(ComputationError):
    pass


class GenerationError(ComputationError):
    pass


class EnumerationBudgetError(ComputationError):
    pass


class ConsistencyError(ComputationError):
    """An identity that must hold between two computations failed"""


class SimulationError(ComputationError):
    def __init__(self, message: str, replication: Optional[int] = None):
        self.replication = replication
        if replication is not None:
            message = f"replication {replication}: {message}"
        super().__init__(message)
