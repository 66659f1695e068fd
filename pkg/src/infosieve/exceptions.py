"""Exception and warning classes raised across the package."""


class SieveError(Exception):
    """Base class for all errors raised by infosieve."""


class InputError(SieveError, ValueError):
    """Bad user input: unreadable data, wrong shapes, invalid options."""


class ParseError(InputError):
    """A CSV cell could not be parsed as a finite real number.

    ``row`` and ``col`` are 1-based positions in the file (the header, when
    present, is row 1).
    """

    def __init__(self, row, col, cell, path=None):
        self.row = row
        self.col = col
        self.cell = cell
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}cannot parse {cell!r} at row {row}, column {col}")


class ShapeError(InputError):
    """Array or file has the wrong number of rows or columns."""


class SchemaError(InputError):
    """A serialized model does not match the supported schema."""


class DegenerateColumn(InputError):
    """A column has zero variance where a non-constant column is required."""

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        super().__init__(message or f"constant column(s) at index {self.columns}")


class DomainError(SieveError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class NumericalError(SieveError, ArithmeticError):
    """Base class for numerical failures (exit code 3 in the CLI)."""


class SingularCovariance(NumericalError):
    """Correlation matrix is singular or too ill-conditioned to factor."""


class NumericalBlowup(NumericalError):
    """A fixed-point step cannot be evaluated (e.g. the projection is identically zero)."""


class DegenerateColumnWarning(UserWarning):
    """A constant column was encountered and mapped to a fixed value."""


class NumericalBlowupWarning(RuntimeWarning):
    """A denominator was clamped or a weight vector diverged during fitting."""


class NoConvergenceWarning(RuntimeWarning):
    """No restart of a layer met the convergence criteria."""
