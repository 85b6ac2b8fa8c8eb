"""Exception types shared across the package."""


class UNSGError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(UNSGError, ValueError):
    pass


class OutOfRangeNeighbor(ValidationError):
    pass


class AsymmetricUndirectedEdge(ValidationError):
    pass


class DuplicateNeighbor(ValidationError):
    pass


class OutOfRangeVertex(ValidationError):
    pass


class InvalidScenario(ValidationError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class IllegalMove(UNSGError, ValueError):
    pass


class GameOver(UNSGError):
    pass


class GameNotOver(UNSGError):
    pass


class PathExplosion(UNSGError):
    pass


class NoFeasiblePath(UNSGError):
    pass


class PolicyIncompatible(UNSGError, ValueError):
    pass


class StateSpaceTooLarge(UNSGError):
    pass


class EmptyPathSet(UNSGError, ValueError):
    pass


class InfoCaseUnsupported(UNSGError):
    pass


class WeightMismatch(UNSGError, ValueError):
    pass


class DimensionMismatch(UNSGError, ValueError):
    pass


class NonConvergence(UNSGError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TreeTooLarge(UNSGError):
    pass
