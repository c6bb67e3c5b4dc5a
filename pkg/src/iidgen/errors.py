"""Exception hierarchy.

Errors split in two families so the CLI can map them onto exit codes:
configuration problems (exit 2) and numerical failures (exit 3).
"""


class IIDError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ConfigError(IIDError, ValueError):
    """Malformed or inconsistent scenario.

    ``path`` names the offending field, e.g. ``plant.N[1]``.
    """

    exit_code = 2

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalFailure(IIDError):
    pass


class NotCyclic(IIDError):
    """Some eigenvalue has geometric multiplicity > 1; no single input vector can control the matrix."""


class DefectiveUnsupported(IIDError):
    """Matrix has a nontrivial Jordan chain; the real block construction is not attempted."""


class Uncontrollable(IIDError):
    pass


class NotHurwitz(IIDError):
    pass


class CommonEigenvalue(IIDError):
    """S and A share an eigenvalue, so the Sylvester operator is singular."""


class StateBlowup(IIDError):
    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)


class InsufficientWindow(IIDError):
    pass


class BudgetExhausted(IIDError):
    """Synthesis found no feasible point; ``result`` holds the best penalty point."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
