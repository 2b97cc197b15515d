"""Evidence -> Dirichlet -> opinion conversions and the Dirichlet density.

Non-negative per-class evidence e maps to Dirichlet parameters
alpha = e + 1 with strength S = sum(alpha).  An opinion splits the unit
of probability mass into per-class beliefs b_k = (alpha_k - 1) / S and
an explicit uncertainty mass u = K / S, so sum(b) + u = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .special import log_gamma

_SIMPLEX_TOL = 1e-9


@dataclass
class DirichletParams:
    alpha: np.ndarray
    strength: float = field(init=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.alpha.ndim != 1 or self.alpha.size == 0:
            raise DomainError("DirichletParams: alpha must be a non-empty vector")
        if not np.all(np.isfinite(self.alpha)) or np.any(self.alpha < 1.0):
            raise DomainError("DirichletParams: every alpha_k must be finite and >= 1")
        self.strength = float(np.sum(self.alpha))


@dataclass
class Opinion:
    belief: np.ndarray
    uncertainty: float

    def __post_init__(self):
        self.belief = np.asarray(self.belief, dtype=np.float64)
        if np.any(self.belief < 0.0) or self.uncertainty < 0.0:
            raise DomainError("Opinion: beliefs and uncertainty must be non-negative")
        total = float(np.sum(self.belief)) + float(self.uncertainty)
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise DomainError(f"Opinion: beliefs and uncertainty sum to {total}, expected 1")


def evidence_to_alpha(evidence: np.ndarray) -> DirichletParams:
    """alpha_k = e_k + 1 for a non-negative evidence vector."""
    e = np.asarray(evidence, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise DomainError("evidence_to_alpha: evidence must be a non-empty vector")
    if not np.all(np.isfinite(e)) or np.any(e < 0.0):
        raise DomainError("evidence_to_alpha: evidence entries must be finite and >= 0")
    return DirichletParams(alpha=e + 1.0)


def alpha_to_opinion(params: DirichletParams) -> Opinion:
    """Belief b_k = (alpha_k - 1) / S and uncertainty u = K / S."""
    k = params.alpha.size
    s = params.strength
    return Opinion(belief=(params.alpha - 1.0) / s, uncertainty=k / s)


def uncertainty_from_evidence(evidence: np.ndarray) -> float:
    """Shortcut for u = K / S without building intermediate objects."""
    e = np.asarray(evidence, dtype=np.float64)
    return e.size / float(np.sum(e + 1.0))


def dirichlet_log_pdf(params: DirichletParams, p: np.ndarray) -> float:
    """Log density of Dirichlet(alpha) at a point of the open simplex."""
    p = np.asarray(p, dtype=np.float64)
    alpha = params.alpha
    if p.shape != alpha.shape:
        raise DomainError(f"dirichlet_log_pdf: point shape {p.shape} != alpha shape {alpha.shape}")
    if np.any(p <= 0.0):
        raise DomainError("dirichlet_log_pdf: point must lie in the open simplex (entries > 0)")
    if abs(float(np.sum(p)) - 1.0) > _SIMPLEX_TOL:
        raise DomainError(f"dirichlet_log_pdf: point entries sum to {float(np.sum(p))}, expected 1")
    log_beta = float(sum(log_gamma(a) for a in alpha) - log_gamma(params.strength))
    return float(np.sum((alpha - 1.0) * np.log(p))) - log_beta


def aggregation_param(opinion: Opinion) -> float:
    """View-quality score: population variance of beliefs over uncertainty."""
    if opinion.uncertainty <= 0.0:
        raise DomainError("aggregation_param: uncertainty must be positive")
    var = float(np.var(opinion.belief))
    p = var / float(opinion.uncertainty)
    if math.isnan(p):
        raise DomainError("aggregation_param: produced NaN")
    return p
