"""Exception hierarchy shared by the lattice modules."""

from __future__ import annotations


class HoLeeError(Exception):
    """Base class for every error raised by this package."""


class OffGridError(HoLeeError, ValueError):
    """A time or maturity does not sit on the trading grid."""


class DegenerateSpread(HoLeeError, ZeroDivisionError):
    """U(t,T) == D(t,T) (t == T), so a formula dividing by U - D is undefined."""


class ArithmeticUnderflow(HoLeeError, ArithmeticError):
    """A node price became non-positive or non-finite during induction."""

    def __init__(self, message: str, step: int | None = None, node: int | None = None):
        super().__init__(message)
        self.step = step
        self.node = node


class NonRecombiningError(HoLeeError):
    """Up-then-down and down-then-up children of a node disagree."""

    def __init__(self, message: str, step: int, node: int, spread: float):
        super().__init__(message)
        self.step = step
        self.node = node
        self.spread = spread


class ConfigError(HoLeeError, ValueError):
    """Invalid run configuration or input file."""
