"""Exception hierarchy shared by every qrs module."""


class QRSError(Exception):
    """Base class for all qrs errors."""


class InvalidStateError(QRSError, ValueError):
    """A matrix or vector violates a quantum-state invariant."""


class InvalidObservableError(QRSError, ValueError):
    """A measurement operator is not a projector."""


class ParameterError(QRSError, ValueError):
    """Test or bound parameters fall outside their admissible range."""


class DomainError(ParameterError):
    """A closed-form bound is evaluated outside its domain of validity."""


class ConfigurationError(QRSError):
    """A schedule, source or experiment config cannot satisfy the request."""


class EstimationError(QRSError):
    """No usable data to form an estimate (e.g. every round aborted)."""
