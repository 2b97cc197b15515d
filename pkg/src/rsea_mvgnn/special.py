"""Digamma, trigamma and log-gamma for positive real arguments.

All three use the same scheme: shift the argument above 10 with the
ascending recurrence, then evaluate the de Moivre / Stirling asymptotic
series (Bernoulli-number coefficients, see Abramowitz & Stegun 6.1.40,
6.3.18, 6.4.11).  With the cutoff at 10 the first neglected series term
is below 1e-15, so accuracy is limited by float64 rounding only.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

_HALF_LN_TWO_PI = 0.5 * math.log(2.0 * math.pi)
_SHIFT_CUTOFF = 10.0


def _check_positive(name: str, x: float) -> float:
    x = float(x)
    if math.isnan(x) or x <= 0.0:
        raise DomainError(f"{name}: argument must be a positive real, got {x}")
    return x


def digamma(x: float) -> float:
    """d/dx log Gamma(x) for x > 0."""
    x = _check_positive("digamma", x)
    acc = 0.0
    while x < _SHIFT_CUTOFF:
        acc -= 1.0 / x
        x += 1.0
    r = 1.0 / (x * x)
    series = r * (
        1.0 / 12.0
        - r * (1.0 / 120.0
               - r * (1.0 / 252.0
                      - r * (1.0 / 240.0
                             - r * (1.0 / 132.0 - r * (691.0 / 32760.0)))))
    )
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x: float) -> float:
    """d/dx digamma(x) for x > 0."""
    x = _check_positive("trigamma", x)
    acc = 0.0
    while x < _SHIFT_CUTOFF:
        acc += 1.0 / (x * x)
        x += 1.0
    r = 1.0 / (x * x)
    series = (1.0 / x) * r * (
        1.0 / 6.0
        - r * (1.0 / 30.0
               - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * (5.0 / 66.0))))
    )
    return acc + 1.0 / x + 0.5 * r + series


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    x = _check_positive("log_gamma", x)
    shift = 1.0
    while x < _SHIFT_CUTOFF:
        shift *= x
        x += 1.0
    r = 1.0 / (x * x)
    series = (
        1.0 / 12.0
        - r * (1.0 / 360.0
               - r * (1.0 / 1260.0
                      - r * (1.0 / 1680.0
                             - r * (1.0 / 1188.0 - r * (691.0 / 360360.0)))))
    ) / x
    value = (x - 0.5) * math.log(x) - x + _HALF_LN_TWO_PI + series
    return value - math.log(shift)


def digamma_array(x: np.ndarray) -> np.ndarray:
    """Elementwise digamma; raises if any entry is non-positive."""
    flat = np.asarray(x, dtype=np.float64).ravel()
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        out[i] = digamma(v)
    return out.reshape(np.shape(x))


def trigamma_array(x: np.ndarray) -> np.ndarray:
    """Elementwise trigamma; raises if any entry is non-positive."""
    flat = np.asarray(x, dtype=np.float64).ravel()
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        out[i] = trigamma(v)
    return out.reshape(np.shape(x))
