"""Exception hierarchy shared across the package."""


class TagSysIdError(Exception):
    """Base class for all errors raised by tagsysid."""


class GrammarError(TagSysIdError):
    """Malformed grammar definition or grammar file."""


class UnknownGrammar(GrammarError, KeyError):
    pass


class TreeOperationError(TagSysIdError):
    pass


class LabelMismatch(TreeOperationError):
    pass


class NotALeaf(TreeOperationError):
    pass


class NullAdjunctionViolation(TreeOperationError):
    pass


class FootAdjunction(TreeOperationError):
    """Adjunction was attempted at a foot node."""


class IncompleteTree(TreeOperationError):
    pass


class ParseError(TagSysIdError, ValueError):
    """Malformed token sequence, equation or data file.

    ``position`` is the token index (model parsing) or 1-based line number
    (file parsing) at which the problem was found.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class LagOutOfRange(TagSysIdError, IndexError):
    pass


class Divergence(TagSysIdError, ArithmeticError):
    """Free-run simulation left the admissible output range."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InsufficientData(TagSysIdError, ValueError):
    pass


class DegenerateOutput(TagSysIdError, ValueError):
    pass


class NonFiniteSample(TagSysIdError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class UnknownSystem(TagSysIdError, KeyError):
    pass
