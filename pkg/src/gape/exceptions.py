"""Exception hierarchy shared by every module in the package."""


class GapeError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GapeError, ValueError):
    """An argument lies outside the domain of the requested measure."""


class UndefinedMeasureError(InputError):
    """The requested measure has no meaningful value for these inputs."""


class DivergenceError(InputError):
    """A model diverges for the supplied parameters (e.g. r <= g)."""


class IneligibleError(InputError):
    """Earnings fail the positivity requirement of the growth estimator."""


class DataError(GapeError):
    """Malformed or inconsistent input data.

    ``diagnostics`` carries one human-readable line per offending row.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join("  " + d for d in self.diagnostics)


class FormationError(GapeError):
    """A portfolio formation event could not be completed."""

    def __init__(self, message, year=None):
        super().__init__(message)
        self.year = year
