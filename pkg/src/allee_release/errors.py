"""Exception hierarchy shared across the package."""


class AlleeReleaseError(Exception):
    """Base class for all package errors."""


class ParameterError(AlleeReleaseError, ValueError):
    pass


class NonPositiveParameter(ParameterError):
    pass


class AssumptionViolated(ParameterError):
    """A standing modelling assumption does not hold.

    ``condition`` names the violated condition (``"births_exceed_deaths"``,
    ``"survival_advantage"`` or ``"threshold_ordering"``).
    """

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class NegativeDiscriminant(ParameterError):
    pass


class OriginExcluded(AlleeReleaseError, ValueError):
    pass


class NegativeRelease(AlleeReleaseError, ValueError):
    pass


class InvalidStep(AlleeReleaseError, ValueError):
    pass


class HorizonNonPositive(AlleeReleaseError, ValueError):
    pass


class EmptyTrajectory(AlleeReleaseError, ValueError):
    pass


class InvalidTau(AlleeReleaseError, ValueError):
    pass


class OffsetOutOfRange(AlleeReleaseError, ValueError):
    pass


class NonPositiveState(AlleeReleaseError, ValueError):
    pass


class SingularPeriod(AlleeReleaseError, ArithmeticError):
    pass


class NoPositiveBranch(AlleeReleaseError, ValueError):
    pass


class BoxViolation(AlleeReleaseError, ValueError):
    pass


class BudgetExhausted(AlleeReleaseError, RuntimeError):
    pass


class TooManyReleases(AlleeReleaseError, ValueError):
    pass


class GridTooFine(AlleeReleaseError, ValueError):
    pass


class InfeasibleAtCap(AlleeReleaseError, ValueError):
    pass


class ConfigError(AlleeReleaseError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class SchemaViolation(ConfigError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class IoError(AlleeReleaseError, OSError):
    pass
