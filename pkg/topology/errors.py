"""Typed failures raised across the toolkit.

Every error carries the process exit code the driver reports for it:
2 for unreadable input, 3 for violated preconditions, 4 for numerical
failures and 5 for negative verdicts.
"""


class Z2FormsError(Exception):
    exit_code = 1
    status = "FAILURE"


class ParseError(Z2FormsError):
    exit_code = 2


# preconditions
class PreconditionError(Z2FormsError):
    exit_code = 3


class InputError(PreconditionError):
    pass


class DegreeError(PreconditionError):
    pass


class DimensionError(PreconditionError):
    pass


class ManifoldError(PreconditionError):
    pass


class NoLineBundle(PreconditionError):
    pass


class NotClosed(PreconditionError):
    pass


class NotRational(PreconditionError):
    pass


class DegenerateSamples(PreconditionError):
    pass


class MonodromyError(PreconditionError):
    pass


class NeedsPerturbation(PreconditionError):
    pass


class CriticalCollision(PreconditionError):
    pass


class IoError(PreconditionError, OSError):
    pass


# numerical
class NumericalError(Z2FormsError):
    exit_code = 4


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None, niter=None):
        super().__init__(message)
        self.residual = residual
        self.niter = niter


class IntegerOverflowError(NumericalError, ArithmeticError):
    pass


# verdicts
class VerdictError(Z2FormsError):
    exit_code = 5
    status = "OBSTRUCTED"


class Obstructed(VerdictError):
    pass


class MorseObstruction(VerdictError):
    def __init__(self, message, critical_cells=None):
        super().__init__(message)
        self.critical_cells = critical_cells or []


class PruneFailed(VerdictError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
