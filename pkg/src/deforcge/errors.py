"""Exception types raised across the package.

Every error derives from :class:`DeforcgeError` so callers (the CLI in
particular) can catch one base class and still report a precise kind.
"""

from __future__ import annotations


class DeforcgeError(Exception):
    """Base class for all package errors."""

    kind = "DeforcgeError"

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context

    def record(self) -> dict:
        """Machine-readable summary used by the CLI error channel."""
        out = {"error": type(self).__name__, "message": str(self)}
        for key, value in self.context.items():
            out[key] = value if isinstance(value, (int, float, str, bool, type(None))) else repr(value)
        return out


# sam-core
class MalformedRecord(DeforcgeError):
    pass


class DuplicateCell(DeforcgeError):
    pass


class ZeroLine(DeforcgeError):
    pass


class ShareOutOfRange(DeforcgeError):
    pass


class MissingLinkage(DeforcgeError):
    pass


class NotDisaggregated(DeforcgeError):
    pass


# land-share
class MissingLandUse(DeforcgeError):
    pass


class NegativeHectares(DeforcgeError):
    pass


class UnmappedCrop(DeforcgeError):
    pass


class ZeroTotalArea(DeforcgeError):
    pass


class LinkageCycle(DeforcgeError):
    pass


class MissingLinkageTarget(DeforcgeError):
    pass


# cge-model
class NonPositivePrice(DeforcgeError):
    pass


class DomainError(DeforcgeError):
    pass


class NegativeDisposableIncome(DeforcgeError):
    pass


class DimensionMismatch(DeforcgeError):
    pass


# solver / calibration
class NotConverged(DeforcgeError):
    pass


class SingularJacobian(DeforcgeError):
    pass


class UnbalancedSAM(DeforcgeError):
    pass


class MissingElasticity(DeforcgeError):
    pass


class InconsistentFactorData(DeforcgeError):
    pass


class TargetInfeasible(DeforcgeError):
    pass


# dynamics
class ForestExhausted(DeforcgeError):
    pass


class NegativeStock(DeforcgeError):
    pass


# emissions
class MissingCoefficient(DeforcgeError):
    pass


class InconsistentDrivers(DeforcgeError):
    pass


class WindowOutOfRange(DeforcgeError):
    pass


# scenario
class CapUnreachable(DeforcgeError):
    pass


class MismatchedTrajectories(DeforcgeError):
    pass


class ScenarioFileError(DeforcgeError):
    pass
