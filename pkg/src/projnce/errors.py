"""Exception types shared across the package."""


class ProjnceError(Exception):
    """Base class for all package errors."""


class DimensionError(ProjnceError):
    """Operand shapes are incompatible."""


class DegenerateNorm(ProjnceError):
    """A vector is too close to zero to normalize onto the sphere."""


class DomainError(ProjnceError):
    """Argument outside a function's mathematical domain."""


class EvalError(ProjnceError):
    """A numerical evaluation produced a non-finite value."""


class NoiseImpossible(ProjnceError):
    """Label noise requested but no alternative class exists."""


class SingularCovariance(ProjnceError):
    """A pushforward covariance stayed singular even after jitter."""


class EmptyClass(ProjnceError):
    """A class-level projection was requested for a class with no members."""


class EmptySupport(ProjnceError):
    """A kernel-weighted estimate has no mass inside the bandwidth."""


class MissingPositive(ProjnceError):
    """An anchor has no positive partner in the batch."""


class NonFiniteGradient(ProjnceError):
    """A gradient contains NaN or Inf."""


class DegenerateLabels(ProjnceError):
    """Fewer than two classes present where a classifier is required."""


class InsufficientSamples(ProjnceError):
    """Too few samples for the requested estimator."""


class ConfigError(ProjnceError):
    """Invalid or inconsistent configuration."""
