"""Exception hierarchy.

Every error carries a short ``category`` string that the command line
reports verbatim, so scripts can branch on it without parsing messages.
"""


class GenPhysError(Exception):
    category = "error"


class DomainError(GenPhysError, ValueError):
    category = "domain"


class AccuracyError(GenPhysError, ValueError):
    category = "accuracy"


class UnsupportedKindError(GenPhysError, ValueError):
    category = "unsupported"


class SingularityError(GenPhysError, ArithmeticError):
    """A field or kernel was requested on a singular locus.

    ``where`` holds whatever context the raiser had (point, time, particle
    index) so callers further up can report it.
    """

    category = "singularity"

    def __init__(self, message, **where):
        super().__init__(message)
        self.where = dict(where)

    def __str__(self):
        base = super().__str__()
        if not self.where:
            return base
        ctx = ", ".join(f"{k}={v!r}" for k, v in self.where.items())
        return f"{base} [{ctx}]"


class ClipViolationError(DomainError):
    category = "clip"


class UnderflowError(SingularityError):
    """Every kernel term underflowed, even in the log domain."""

    category = "underflow"


class ConvergenceError(GenPhysError, ArithmeticError):
    category = "convergence"


class GridTooCoarseError(ConvergenceError):
    category = "grid"


class PopulationError(GenPhysError, RuntimeError):
    category = "population"

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class ConfigError(GenPhysError, ValueError):
    category = "config"

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class RenderDimensionError(DomainError):
    """Plots are drawn for N <= 2 only."""

    category = "render"
