"""Exception hierarchy for the qfactor package.

Data errors (bad input files, schema problems) and numerical errors
(rank deficiency, singular Gram matrices) are kept in separate branches
so the CLI can map them to distinct exit codes.
"""


class QFactorError(Exception):
    """Base class for all package errors."""


class DataError(QFactorError):
    """Problems with input data (files, schemas, panel structure)."""


class NumericalError(QFactorError):
    """Numerical failures (rank deficiency, singularity, divergence)."""


class UsageError(QFactorError):
    """Invalid arguments or configuration."""


# --- panel ---------------------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing column: {column!r}")


class NonNumericCell(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(
            f"non-numeric or non-finite value {value!r} in column {column!r}, row {row}"
        )


class DuplicateObservation(DataError):
    def __init__(self, unit, period):
        self.unit = unit
        self.period = period
        super().__init__(f"duplicate observation for unit {unit!r} in period {period!r}")


class EmptyPeriod(DataError):
    def __init__(self, period):
        self.period = period
        super().__init__(f"period {period!r} has no observations")


class UnknownPeriod(DataError):
    def __init__(self, period):
        self.period = period
        super().__init__(f"period {period!r} not present in panel")


class InsufficientObservations(DataError):
    def __init__(self, period, n_obs, n_basis):
        self.period = period
        self.n_obs = n_obs
        self.n_basis = n_basis
        super().__init__(
            f"period {period!r} has {n_obs} observations, fewer than the "
            f"basis dimension {n_basis}"
        )


# --- sieve ---------------------------------------------------------------

class NonFiniteInput(NumericalError):
    pass


# --- qreg ----------------------------------------------------------------

class RankDeficient(NumericalError):
    pass


class DegenerateProblem(NumericalError):
    pass


class GuardExceeded(UsageError):
    pass


class NoNonsingularSubset(NumericalError):
    pass


# --- qrpca / selectk -----------------------------------------------------

class KOutOfRange(UsageError):
    pass


class TooFewEigenvalues(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


# --- bootstrap / evaluate ------------------------------------------------

class SingularGram(NumericalError):
    pass


class TooFewDraws(UsageError):
    pass


class InsufficientHistory(UsageError):
    pass
