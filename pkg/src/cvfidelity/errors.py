"""Exception types shared across the package."""


class CVFidelityError(Exception):
    """Base class for all package errors."""


class DomainError(CVFidelityError, ValueError):
    """An argument lies outside the domain of the operation."""


class UndefinedQuantityError(CVFidelityError, ValueError):
    """The requested quantity is not defined for this state (e.g. Fano factor of vacuum)."""


class NumericalConsistencyError(CVFidelityError, ArithmeticError):
    """A closed-form evaluation drifted outside its admissible range beyond tolerance."""


class CutoffError(CVFidelityError, ValueError):
    """The Fock-space cutoff is too small to represent the state faithfully."""


class ConfigError(CVFidelityError, ValueError):
    """A scan or CLI configuration is invalid."""
