"""Exception and warning types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


class PolaritonError(Exception):
    """Base class for all package errors."""


@dataclass(frozen=True)
class Violation:
    """One violated parameter invariant."""

    kind: str       # NonPositiveRate | NegativeCount | NonFinite | MissingField | UnknownField
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}({self.field}): {self.message}"


class ParameterError(PolaritonError, ValueError):
    """Raised with the full list of violated invariants, not just the first."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def fields(self) -> set[str]:
        return {v.field for v in self.violations}


class DegenerateBright(PolaritonError, ArithmeticError):
    """The two bright eigenvalues coincide; no perturbation is attempted."""


class NegativeTime(PolaritonError, ValueError):
    """Propagation requested for t < 0."""


class NegativeWaitingTime(NegativeTime):
    """Waiting time between pump and probe must be nonnegative."""


class DivergentTransform(PolaritonError, ArithmeticError):
    """Half-line Fourier transform evaluated outside its convergence domain."""


class TooLarge(PolaritonError, ValueError):
    """Brute-force oracle requested beyond its intended size limit."""


class MalformedGrid(PolaritonError, ValueError):
    """Spectrum grid file cannot be parsed."""


class TruncationWarning(UserWarning):
    """Truncated Fock space leaked weight into its highest levels."""
