"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class ConstRankError(Exception):
    """Base class for all library errors."""


class ParseError(ConstRankError):
    """Expression syntax error; ``offset`` is the 1-based byte position."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class ParameterRangeError(ParseError):
    pass


class DomainError(ConstRankError):
    """Raised when an expression is evaluated outside its real domain."""

    def __init__(self, message: str, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"{message}: {subexpr}")


class ImmersionFailure(ConstRankError):
    pass


class DistributionRankFailure(ConstRankError):
    pass


class NormalSectionVanishes(ConstRankError):
    pass


class NotNormalError(ConstRankError):
    pass


class DegenerateRuling(ConstRankError):
    pass


class WrongFiberDimension(ConstRankError):
    def __init__(self, actual: int, expected: int):
        self.actual = actual
        self.expected = expected
        super().__init__(f"fiber has dimension {actual}, expected {expected}")


class ProblemFileError(ConstRankError):
    """Schema, dimension or expression error in a problem file.

    ``field`` is a dotted/indexed path such as ``xi[2]`` or ``domain``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
