from typing import Any


class LabError(Exception):
    """
    Base class for every error raised by the concentration lab.
    """


class DomainError(LabError, ValueError):
    """
    An argument lies outside the mathematical domain of the operation.
    """


class NotConvexError(DomainError):
    """
    A check that requires a convex function was handed a non-convex one.
    """


class CatalogKeyError(LabError, KeyError):
    """
    A catalog key could not be resolved into a function.
    """

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else 'Unresolvable catalog key'


class UnknownCheckError(LabError, KeyError):
    """
    A verdict name does not exist in the inequality suite.
    """

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else 'Unknown check'


class ConfigError(LabError, ValueError):
    """
    An experiment configuration is invalid.
    """


class ReportIOError(LabError, OSError):
    """
    A report or side file could not be written.
    """


class NonFiniteEvaluationError(LabError, ArithmeticError):
    """
    A function evaluation produced NaN or infinity. The offending input is kept for inspection.
    """

    def __init__(self, function_key: str, offending_input: Any, value: float):
        super().__init__(f'Evaluation of "{function_key}" produced a non-finite value ({value}).')
        self.function_key = function_key
        self.offending_input = offending_input
        self.value = value
