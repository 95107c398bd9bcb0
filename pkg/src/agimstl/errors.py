"""Exception hierarchy shared by the parser, evaluators, simulator and CLI."""


class STLError(Exception):
    """Base class for every error raised by this package."""


class STLSyntaxError(STLError):
    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class IntervalError(STLError):
    pass


class UnsupportedOperator(STLError):
    pass


class OutOfDomain(STLError):
    pass


class OutOfBounds(STLError):
    pass


class NotNormalized(STLError):
    pass


class BranchViolation(STLError):
    """A log-domain integrand left its admissible range; indicates a bug in branch selection."""


class NonFinite(STLError):
    pass


class Misaligned(STLError):
    pass


class TraceFormatError(STLError):
    pass


class ConfigError(STLError):
    pass
