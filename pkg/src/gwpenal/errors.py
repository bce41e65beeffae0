"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: configuration/domain problems exit 2,
non-convergence exits 3 and failed verifications exit 1.
"""


class GWError(Exception):
    """Base class for all errors raised by :mod:`gwpenal`."""


class DomainError(GWError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceCapError(GWError, RuntimeError):
    """A configured size cap would be exceeded.

    ``bound`` names the cap that was hit and ``stats`` carries whatever
    partial statistics were available when the operation stopped.
    """

    def __init__(self, message, bound=None, stats=None):
        super().__init__(message)
        self.bound = bound
        self.stats = stats or {}


class ExactSizeError(ResourceCapError):
    """A rational number outgrew the exact-mode bit-length cap."""


class ConvergenceError(GWError, ArithmeticError):
    """An iterative limit failed to stabilise within its iteration budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class VerificationError(GWError, AssertionError):
    """An identity that must hold exactly was found to be violated."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
