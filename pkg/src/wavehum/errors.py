"""Exception types raised across the package."""


class WaveHumError(Exception):
    """Base class for all package errors."""


class MisalignedInterface(WaveHumError):
    pass


class DegenerateDomain(WaveHumError):
    pass


class ObserverOutsideInner(WaveHumError):
    pass


class EmptyControlRegion(WaveHumError):
    pass


class NotSymmetric(WaveHumError):
    pass


class NotElliptic(WaveHumError):
    pass


class NonPositiveH(WaveHumError):
    pass


class ShapeMismatch(WaveHumError):
    pass


class CflViolation(WaveHumError):
    pass


class NonFiniteState(WaveHumError):
    pass


class RegionTooThin(WaveHumError):
    pass


class NotConverged(WaveHumError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleGeometry(WaveHumError):
    """R(x0) >= alpha / (n M): no admissible control time exists."""


class EmptyEnsemble(WaveHumError):
    pass


class BudgetExceeded(WaveHumError):
    pass


class ConfigError(WaveHumError):
    """Invalid scenario file; ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
