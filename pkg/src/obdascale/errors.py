"""Exception hierarchy shared by every pipeline phase."""


class ScalerError(Exception):
    """Base class for all errors raised by obdascale."""

    exit_code = 1


class ParseError(ScalerError):
    exit_code = 3

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ValidationError(ScalerError):
    """Schema, mapping or seed instance violates a declared constraint."""

    exit_code = 4


class DataError(ValidationError):
    """The seed data does not conform to the schema."""


class PlanningError(ScalerError):
    exit_code = 5


class UnsatError(PlanningError):
    """The interval constraint program has no solution."""

    exit_code = 6

    def __init__(self, message, cluster=None):
        self.cluster = cluster
        super().__init__(message)


class SolverBudgetError(PlanningError):
    exit_code = 7

    def __init__(self, message, cluster=None):
        self.cluster = cluster
        super().__init__(message)


class InputOutputError(ScalerError):
    exit_code = 8


class ExportError(InputOutputError):
    """Writing the scaled instance failed; partial files were removed."""


class OutputInvalid(ScalerError):
    """Post-export validation found violations."""

    exit_code = 9
