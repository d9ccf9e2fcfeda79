"""Scale a seed relational instance s times while keeping the statistics OBDA queries depend on."""

from .errors import (
    DataError,
    ExportError,
    InputOutputError,
    ParseError,
    PlanningError,
    ScalerError,
    SolverBudgetError,
    UnsatError,
    ValidationError,
)
from .generate import export_instance
from .intervals import build_plan
from .mappings import parse_mappings
from .pipeline import RunConfig, run
from .schema import ColumnRef, Datatype, Schema, load_schema
from .stats import scan_instance
from .validate import validate_output

__version__ = "0.1.0"
