"""Semantic exception hierarchy.

Three failure classes are distinguished throughout the package:
mismatched or out-of-domain arguments (DomainError), violated construction
invariants (InvariantViolation), and numerical contract breaches such as a
trace with a large imaginary part (NumericalError).
"""


class PpmkitError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PpmkitError, ValueError):
    """An argument is outside its domain or incompatible with another."""


class InvariantViolation(PpmkitError, ValueError):
    """A value under construction fails one of its declared invariants."""


class NumericalError(PpmkitError, FloatingPointError):
    """A numerical result breaches its tolerance contract."""
