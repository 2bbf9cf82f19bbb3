"""Exception types raised across the package."""


class BellgapError(Exception):
    """Base class for all package errors."""


class ContractError(BellgapError, ValueError):
    """An input violates a documented precondition."""


class DimensionError(ContractError):
    """Operator or factor shapes do not line up."""


class NumericError(BellgapError, ArithmeticError):
    """A computed quantity left its admissible numeric range."""


class ParseError(ContractError):
    """A serialized input is malformed or lacks a required field."""
