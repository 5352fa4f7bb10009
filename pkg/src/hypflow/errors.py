"""Exception hierarchy shared by all hypflow modules."""


class HypflowError(Exception):
    """Base class for library errors."""


class ParseError(HypflowError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class UnsupportedPresentation(HypflowError):
    pass


class RadiusTooLarge(HypflowError):
    pass


class NondeterministicLabel(HypflowError):
    pass


class UnreachableState(HypflowError):
    pass


class InvalidOrder(HypflowError):
    pass


class NoCycles(HypflowError):
    pass


class NotIrreducible(HypflowError):
    pass


class NoConvergence(HypflowError):
    def __init__(self, message, iterations=None, residual=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class MissingBlockWeight(HypflowError):
    pass


class RecodingTooLarge(HypflowError):
    """A higher-block recoding would exceed the configured block budget."""


class NoBracketing(HypflowError):
    pass


class SupremumOnBoundary(HypflowError):
    pass


class DegenerateInterval(HypflowError):
    pass


class InsufficientRange(HypflowError):
    pass


class ValidationFailed(HypflowError):
    """Raised by builders asked to self-check when the check fails."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"automaton failed validation: {report}")
