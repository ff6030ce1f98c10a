"""
Special functions used by the closed-form secrecy analysis.

Gamma, Beta and the incomplete Gamma come from scipy.special. The Whittaker
function is built on Tricomi's confluent hypergeometric function U, which is
evaluated from its real-axis integral representation with adaptive
quadrature (scipy.integrate.quad).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

import config
from core.errors import DomainError, UnsupportedParameterError, NumericalFailureError

logger = logging.getLogger(__name__)

_clamp_events = 0


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances handed to the adaptive quadrature."""
    abs_tol: float = config.QUAD_ABS_TOL
    rel_tol: float = config.QUAD_REL_TOL
    max_subdivisions: int = config.QUAD_MAX_SUBDIVISIONS

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be strictly positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")


DEFAULT_QUADRATURE = QuadratureSpec()


def _require_positive(name: str, value: float):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value}")


# ==================== Gamma family ====================

def gamma_fn(x: float) -> float:
    """Gamma function for x > 0."""
    _require_positive("x", x)
    return float(special.gamma(x))


def lower_incomplete_gamma(a: float, x: float) -> float:
    """Lower incomplete Gamma function gamma(a, x) = int_0^x t^(a-1) e^(-t) dt."""
    _require_positive("a", a)
    if not (np.isfinite(x) and x >= 0):
        raise DomainError(f"x must be a non-negative finite number, got {x}")
    return float(special.gammainc(a, x) * special.gamma(a))


def regularized_lower_gamma(a: float, x: float) -> float:
    """gamma(a, x) / Gamma(a); the form every closed form consumes."""
    _require_positive("a", a)
    if not (x >= 0):
        raise DomainError(f"x must be non-negative, got {x}")
    return float(special.gammainc(a, x))


def beta_fn(m: float, n: float) -> float:
    """Beta function B(m, n) = Gamma(m) Gamma(n) / Gamma(m + n)."""
    _require_positive("m", m)
    _require_positive("n", n)
    return float(special.beta(m, n))


def poisson_ccdf_sum(n_T: int, nu: float) -> float:
    """
    Probability that a Gamma(n_T, 1) gain exceeds nu.

    Equals exp(-nu) * sum_{i<n_T} nu^i / i!, i.e. the Poisson(nu) CDF at n_T - 1.
    """
    if n_T < 1:
        raise DomainError(f"n_T must be at least 1, got {n_T}")
    if not (nu >= 0):
        raise DomainError(f"nu must be non-negative, got {nu}")
    if nu == 0:
        return 1.0
    return float(special.pdtr(n_T - 1, nu))


# ==================== Confluent hypergeometric / Whittaker ====================

def confluent_u(a: float, b: float, z: float, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Tricomi U(a, b, z) for a > 0 and z > 0.

    Uses U = z^(-a) / Gamma(a) * int_0^inf e^(-x) x^(a-1) (1 + x/z)^(b-a-1) dx,
    the usual Laplace-type representation after the substitution x = z t.
    """
    if not a > 0:
        raise UnsupportedParameterError(
            f"U(a, b, z) integral representation needs a > 0, got a={a}")
    _require_positive("z", z)

    power = b - a - 1.0

    def smooth_part(x):
        return math.exp(-x + power * math.log1p(x / z))

    def tail(x):
        return math.exp((a - 1.0) * math.log(x) - x + power * math.log1p(x / z))

    # Algebraic endpoint weight x^(a-1) on [0, 1], plain semi-infinite rule beyond.
    head_value, _ = integrate.quad(
        smooth_part, 0.0, 1.0, weight='alg', wvar=(a - 1.0, 0.0),
        epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions)
    tail_value, _ = integrate.quad(
        tail, 1.0, np.inf,
        epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions)

    log_value = -a * math.log(z) - special.gammaln(a) + math.log(head_value + tail_value)
    if not np.isfinite(log_value):
        raise NumericalFailureError(f"U({a}, {b}, {z}) is not finite")
    return math.exp(log_value)


def scaled_whittaker_w(k: float, m: float, z: float,
                       quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """exp(z/2) * W_{k,m}(z) = z^(m+1/2) U(m-k+1/2, 1+2m, z)."""
    _require_positive("z", z)
    a = m - k + 0.5
    if not a > 0:
        raise UnsupportedParameterError(
            f"Whittaker W_{{{k},{m}}} needs m - k + 1/2 > 0, got {a}")
    return z ** (m + 0.5) * confluent_u(a, 1.0 + 2.0 * m, z, quad)


def whittaker_w(k: float, m: float, z: float,
                quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Whittaker function W_{k,m}(z) for real parameters with m - k + 1/2 > 0."""
    return math.exp(-0.5 * z) * scaled_whittaker_w(k, m, z, quad)


# ==================== Probability clamping ====================

def clamp_probability(p: float) -> float:
    """Clamp to [0, 1], counting (and logging) overshoots beyond float noise."""
    global _clamp_events
    if p < 0.0 or p > 1.0:
        if p < -config.CLAMP_WARN_TOLERANCE or p > 1.0 + config.CLAMP_WARN_TOLERANCE:
            _clamp_events += 1
            logger.warning(f"Probability {p!r} clamped to [0, 1]")
        else:
            logger.debug(f"Probability {p!r} clamped to [0, 1]")
        return min(1.0, max(0.0, p))
    return p


def clamp_event_count() -> int:
    """Number of clamps beyond tolerance since import."""
    return _clamp_events
