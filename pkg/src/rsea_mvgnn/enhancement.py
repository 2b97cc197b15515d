"""Uncertainty-gated structural enhancement with feature de-correlation.

Node priority is degree centrality plus per-node feature variance.  The
loop alternates: measure uncertainty of the current adjacency with a
caller-supplied probe; if it did not increase, enhance the next batch of
highest-priority nodes (raising their positive edge weights to the global
maximum of the original adjacency) and damp the priority of nodes whose
features resemble the one just enhanced.  The first uncertainty increase,
or running out of nodes, terminates the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import GraphView
from .errors import EnhancementError, ShapeError

UncertaintyProbe = Callable[[np.ndarray], float]


@dataclass
class PriorityState:
    phi: np.ndarray
    delta: np.ndarray
    theta: np.ndarray
    enhanced: set[int] = field(default_factory=set)


@dataclass
class EnhancementOutcome:
    enhanced_adjacency: np.ndarray
    uncertainty_trace: list[float]
    total_enhanced: int
    iterations: int
    symmetric: bool


def degree_centrality(adjacency: np.ndarray) -> np.ndarray:
    """Fraction of the other N-1 nodes each node connects to (weight > 0)."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"degree_centrality: adjacency must be square, got {a.shape}")
    n = a.shape[0]
    if n <= 1:
        return np.zeros(n)
    return np.count_nonzero(a > 0.0, axis=1) / (n - 1)


def feature_variance(features: np.ndarray) -> np.ndarray:
    """Population variance of each node's feature vector."""
    f = np.asarray(features, dtype=np.float64)
    return np.var(f, axis=1)


def priority_vector(adjacency: np.ndarray, features: np.ndarray) -> PriorityState:
    delta = degree_centrality(adjacency)
    theta = feature_variance(features)
    if delta.shape != theta.shape:
        raise ShapeError(f"priority_vector: {delta.shape[0]} nodes in adjacency vs "
                         f"{theta.shape[0]} feature rows")
    return PriorityState(phi=delta + theta, delta=delta, theta=theta)


def enhance_node(adjacency: np.ndarray, ind: int, a_max: float,
                 symmetric: bool = True) -> np.ndarray:
    """Raise every positive edge weight of node ``ind`` to ``a_max``.

    ``a_max`` is the maximum of the ORIGINAL adjacency, captured once
    before the enhancement loop; zero entries (absent edges) stay zero.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    n = a.shape[0]
    if not (0 <= ind < n):
        raise ShapeError(f"enhance_node: index {ind} out of range for {n} nodes")
    out = a.copy()
    mask = out[ind] > 0.0
    out[ind, mask] = a_max
    if symmetric:
        out[mask, ind] = a_max
    return out


def _cosine_to(features: np.ndarray, ind: int) -> np.ndarray:
    """Cosine similarity of every feature row to row ``ind``; rows with
    zero norm get cosine 0 (no de-correlation penalty)."""
    f = np.asarray(features, dtype=np.float64)
    ref = f[ind]
    ref_norm = float(np.linalg.norm(ref))
    norms = np.linalg.norm(f, axis=1)
    if ref_norm == 0.0:
        return np.zeros(f.shape[0])
    cos = np.zeros(f.shape[0])
    nz = norms > 0.0
    cos[nz] = (f[nz] @ ref) / (norms[nz] * ref_norm)
    return cos


def decorrelate(state: PriorityState, features: np.ndarray, ind: int) -> PriorityState:
    """Scale every priority by (1 - cos(F(k), F(ind))); returns the state."""
    if not (0 <= ind < state.phi.shape[0]):
        raise ShapeError(f"decorrelate: index {ind} out of range")
    state.phi = state.phi * (1.0 - _cosine_to(features, ind))
    return state


def iteration_factor(num_nodes: int) -> int:
    """Batch size per accepted round: 5% of the node count, at least 1
    (round half up)."""
    return max(1, int(math.floor(0.05 * num_nodes + 0.5)))


def reliable_enhance(view: GraphView, probe: UncertaintyProbe) -> EnhancementOutcome:
    """Run the uncertainty-gated enhancement loop on one view.

    The probe maps a candidate adjacency to a scalar uncertainty and must
    be deterministic for the duration of the run (frozen model weights).
    """
    a = view.adjacency
    f = view.features
    n = a.shape[0]
    if n < 1:
        raise EnhancementError("reliable_enhance: empty graph")
    symmetric = bool(np.array_equal(a, a.T))
    a_max = float(np.max(a)) if a.size else 0.0
    t = iteration_factor(n)
    state = priority_vector(a, f)

    current = a.copy()
    u_best = math.inf
    target = 0
    trace: list[float] = []
    iterations = 0

    while len(state.enhanced) < n:
        u_new = float(probe(current))
        iterations += 1
        if math.isnan(u_new):
            raise EnhancementError(f"reliable_enhance: probe returned NaN at iteration {iterations}")
        if not (u_new <= u_best):
            break
        u_best = u_new
        trace.append(u_new)
        target = min(target + t, n)
        while len(state.enhanced) < target:
            phi = state.phi.copy()
            phi[list(state.enhanced)] = -np.inf
            ind = int(np.argmax(phi))  # ties broken by lowest index
            current = enhance_node(current, ind, a_max, symmetric=symmetric)
            state.enhanced.add(ind)
            decorrelate(state, f, ind)

    return EnhancementOutcome(enhanced_adjacency=current,
                              uncertainty_trace=trace,
                              total_enhanced=len(state.enhanced),
                              iterations=iterations,
                              symmetric=symmetric)
