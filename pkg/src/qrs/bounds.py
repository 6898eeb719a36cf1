"""Closed-form uncertainty bounds for client and server.

All formulas assume the small-phase regime ``|omega t| << 1``.  Where a bound
diverges (``epsilon = 0`` for the server) the functions return ``math.inf``;
file writers render it as the ``unbounded`` sentinel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import DomainError, ParameterError

S_TILDE_MIN = math.sqrt(math.log(2) / 2)  # exp(-2 s^2) <= 1/2


@dataclass(frozen=True)
class BoundInputs:
    epsilon: float
    M: int
    t: float = 1.0
    s_tilde: float = 2.0
    delta: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.epsilon < 0.5:
            raise DomainError(f"epsilon={self.epsilon!r} outside [0, 1/2)")
        if self.M < 1:
            raise ParameterError("M must be positive")
        if not self.t > 0:
            raise ParameterError("t must be positive")
        if not 0 < self.delta <= 1:
            raise ParameterError("delta must lie in (0, 1]")

    @property
    def leak(self) -> float:
        """``epsilon - epsilon^2``."""
        return self.epsilon - self.epsilon**2


def _check_s_tilde(s_tilde: float) -> None:
    if not s_tilde > 0 or math.exp(-2 * s_tilde**2) > 0.5:
        raise DomainError(f"s_tilde={s_tilde!r} must satisfy exp(-2 s^2) <= 1/2")


def standard_uncertainty(M: int, t: float) -> float:
    """Plain Ramsey uncertainty ``1/(t sqrt(M))``."""
    if M < 1 or not t > 0:
        raise ParameterError("need M >= 1 and t > 0")
    return 1 / (t * math.sqrt(M))


def client_upper(b: BoundInputs) -> float:
    """``(1/t) sqrt(1/M + 4(eps - eps^2))``, holding with probability ``(1-delta)^M``."""
    if b.epsilon == 0:
        return standard_uncertainty(b.M, b.t)
    return math.sqrt(1 / b.M + 4 * b.leak) / b.t


def client_floor(epsilon: float, t: float = 1.0) -> float:
    """Limit of :func:`client_upper` as ``M -> inf``."""
    return 2 * math.sqrt(epsilon - epsilon**2) / t


def server_lower(b: BoundInputs) -> float:
    """``(1/2t) sqrt((1 - 4(eps - eps^2)) / (M (eps - eps^2)))``; ``inf`` at ``eps = 0``."""
    if b.epsilon == 0:
        return math.inf
    return math.sqrt((1 - 4 * b.leak) / (b.M * b.leak)) / (2 * b.t)


def epsilon_from_resources(k: int, Delta: float, delta: float) -> float:
    """Smallest epsilon certified by ``k``: ``3 Delta + sqrt(75 ln(2/delta) / (8k))``.

    Warns when the result is >= 1/2, where the uncertainty bounds do not apply.
    """
    if k < 1:
        raise ParameterError("k must be positive")
    if not 0 < delta <= 1 or Delta < 0:
        raise ParameterError("need 0 < delta <= 1 and Delta >= 0")
    eps = 3 * Delta + math.sqrt(75 * math.log(2 / delta) / (8 * k))
    if eps >= 0.5:
        warnings.warn(f"epsilon={eps:.4g} >= 1/2 for k={k}: bounds inapplicable", RuntimeWarning, stacklevel=2)
    return eps


def asymmetry_ratio(b: BoundInputs) -> float:
    """``server_lower / client_upper``."""
    return server_lower(b) / client_upper(b)


def confidence_level(delta: float, M: int, s_tilde: float | None = None) -> float:
    """``(1-delta)^M``, times ``1 - 2 exp(-2 s^2)`` when ``s_tilde`` is given."""
    if not 0 < delta <= 1 or M < 1:
        raise ParameterError("need 0 < delta <= 1 and M >= 1")
    c = math.exp(M * math.log1p(-delta)) if delta < 1 else 0.0
    if s_tilde is not None:
        _check_s_tilde(s_tilde)
        c *= 1 - 2 * math.exp(-2 * s_tilde**2)
    return c


def hoeffding_standard(M: int, t: float, s_tilde: float) -> float:
    """Confidence half-width ``2 s/(t sqrt(M))`` of plain Ramsey, level ``1 - 2 exp(-2 s^2)``."""
    _check_s_tilde(s_tilde)
    return 2 * s_tilde / (t * math.sqrt(M))


def hoeffding_client_upper(b: BoundInputs) -> float:
    """``2/(t(1-2 eps)) (3 eps + s/sqrt(M) + sqrt(eps - eps^2))``."""
    _check_s_tilde(b.s_tilde)
    e = b.epsilon
    if e == 0:
        return hoeffding_standard(b.M, b.t, b.s_tilde)
    return 2 / (b.t * (1 - 2 * e)) * (3 * e + b.s_tilde / math.sqrt(b.M) + math.sqrt(b.leak))


def hoeffding_server_lower(b: BoundInputs) -> float:
    """``s / (t sqrt(M) sqrt(eps - eps^2))``; ``inf`` at ``eps = 0``."""
    _check_s_tilde(b.s_tilde)
    if b.epsilon == 0:
        return math.inf
    return b.s_tilde / (b.t * math.sqrt(b.M) * math.sqrt(b.leak))


def hoeffding_ratio(b: BoundInputs) -> float:
    return hoeffding_server_lower(b) / hoeffding_client_upper(b)


def mismatched_probability_uncertainty(x: float, y: float, x_prime: float, y_prime: float, M: int) -> float:
    """Small-omega RMS error when estimating with ``P = x + y omega`` but sampling ``P' = x' + y' omega``.

    ``(1/|y|) sqrt(x'(1-x')/M + (x - x')^2)``; the variance is taken at
    ``omega = 0`` so ``y_prime`` drops out.
    """
    if y == 0:
        raise DomainError("slope y must be non-zero")
    if not 0 <= x_prime <= 1:
        raise DomainError("x_prime must be a probability")
    if M < 1:
        raise ParameterError("M must be positive")
    return math.sqrt(x_prime * (1 - x_prime) / M + (x - x_prime) ** 2) / abs(y)
