"""Exception hierarchy.

Errors split into two families so the command line can map them to exit
codes: :class:`InputError` (bad text, bad parameters, violated
preconditions) and :class:`NumericalError` (quadrature, ODE or fitting
failures).
"""


class DiffusymError(Exception):
    """Base class for every error raised by this package."""


class InputError(DiffusymError):
    pass


class NumericalError(DiffusymError):
    pass


class ParseError(InputError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownFunctionError(ParseError):
    def __init__(self, name, offset):
        self.name = name
        super().__init__(f"unknown function {name!r}", offset)


class UnboundParameterError(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"parameter {name!r} is not bound")


class DomainError(InputError):
    """A function was evaluated outside its natural domain."""

    def __init__(self, message, subtree=None):
        self.subtree = subtree
        if subtree is not None:
            message = f"{message} in subexpression {subtree}"
        super().__init__(message)


class PreconditionError(InputError):
    pass


class IntegrationError(NumericalError):
    pass


class OdeError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    def __init__(self, message, condition):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")
