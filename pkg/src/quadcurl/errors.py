"""Exception hierarchy shared across the package.

Every error carries a ``kind`` slug that the CLI prints as a
machine-readable error line.
"""


class QuadCurlError(Exception):
    kind = "error"


class InvalidParameterError(QuadCurlError, ValueError):
    kind = "invalid-parameter"


class UnsupportedDegreeError(QuadCurlError, ValueError):
    kind = "unsupported-degree"


class AssemblyError(QuadCurlError):
    kind = "assembly-failure"


class CondensationError(QuadCurlError):
    """Interior block of an element could not be factorized."""

    kind = "condensation-failure"

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class SolverError(QuadCurlError):
    """Iterative solve failed; ``report`` holds the final SolveReport."""

    kind = "solver-failure"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularMatrixError(QuadCurlError):
    kind = "singular-matrix"


class SizeLimitError(QuadCurlError):
    kind = "size-limit"
