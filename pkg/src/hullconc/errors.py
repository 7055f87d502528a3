"""Exception types shared across the package."""


class HullconcError(Exception):
    """Base class for all package errors."""


class DomainError(HullconcError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(HullconcError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy value."""


class ModelError(HullconcError, ValueError):
    """A distribution model was rejected at construction."""


class InfeasibleError(HullconcError):
    """A linear program has no feasible point."""


class NetError(HullconcError):
    """A net violates its cardinality or covering guarantees."""


class CertificateError(HullconcError):
    """A net does not match the oracle it is supposed to certify against."""


class ConfigError(HullconcError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending path."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SoundnessError(HullconcError, AssertionError):
    """A certified sandwich was contradicted by brute force."""
