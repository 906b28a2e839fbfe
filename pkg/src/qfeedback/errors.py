"""Exception hierarchy.

``InvalidInput`` subclasses map to CLI exit code 2, ``NumericalFailure``
subclasses to exit code 3.
"""


class QFeedbackError(Exception):
    pass


class InvalidInput(QFeedbackError, ValueError):
    pass


class NumericalFailure(QFeedbackError, ArithmeticError):
    pass


# quadratures
class ZeroFrame(InvalidInput):
    pass


class UnnormalizableFrame(InvalidInput):
    pass


class FreeParticle(InvalidInput):
    pass


class NotFreeParticle(InvalidInput):
    pass


# moments / trajectories
class IntegrationUnstable(NumericalFailure):
    pass


class HeisenbergViolation(NumericalFailure):
    pass


class BudgetExceeded(InvalidInput):
    pass


# control
class HeatingRegime(InvalidInput):
    pass


class NegativeOccupation(InvalidInput):
    pass


class InvalidAnalogy(InvalidInput):
    pass


# gridsim
class GridTooSmall(InvalidInput):
    pass


class NotNormalized(InvalidInput):
    pass


class NormCollapse(NumericalFailure):
    pass


class BoundaryLeak(NumericalFailure):
    pass


# fockspace
class TruncationLeak(NumericalFailure):
    pass


class PositivityLoss(NumericalFailure):
    pass
