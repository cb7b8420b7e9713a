class PolsynthError(Exception):
    """Base class of every error raised by polsynth."""


class InputError(PolsynthError):
    """Errors caused by user-provided models, problems or policies."""


class ModelSyntaxError(InputError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SemanticsError(InputError):
    pass


class UnknownLabel(InputError):
    pass


class ConflictingSpecs(InputError):
    pass


class InvalidSpecification(InputError):
    pass


class InvalidDiscount(InputError):
    pass


class InvalidPolicy(InputError):
    pass


class EmptyTarget(InputError):
    pass


class MissingVariable(PolsynthError):
    pass


class NumericalFailure(PolsynthError):
    pass


class NoIncumbent(PolsynthError):
    pass


class NonIntegralPolicy(PolsynthError):
    pass


class InvalidPartition(PolsynthError):
    pass


class NotSplittable(PolsynthError):
    pass


class InitialStateSplit(PolsynthError):
    pass


class SingularSystem(PolsynthError):
    pass


class TooManyPolicies(PolsynthError):
    pass


class InvalidOptions(InputError, ValueError):
    """Solver or synthesis settings out of range."""
