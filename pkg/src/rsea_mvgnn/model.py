"""Multi-view GNN forward pass with opinion-driven view weighting.

Per layer and per view: a one-hop graph convolution produces intermediate
features, an evidence head (softplus, mean-pooled over nodes) yields a
per-class evidence vector, and the resulting opinion scores the view as
variance(beliefs) / uncertainty.  Views are then mixed by a learned VxV
matrix with each view scaled by its score, and a fused evidence head on
the view-averaged features supplies the per-layer classification
evidence.  The final embedding is the mean over views and nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import Dataset, MultiViewGraph
from .errors import ConfigError, ShapeError
from .opinions import Opinion, aggregation_param
from .tensor import Tensor

_ACTIVATIONS = {"relu": T.relu, "sigmoid": T.sigmoid, "softplus": T.softplus}


@dataclass
class ModelConfig:
    num_views: int
    num_classes: int
    layer_dims: list[int]  # [input_dim, hidden..., output_dim]
    activation: str = "relu"
    seed: int = 0
    backprop_aggregation: bool = False

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ConfigError("layer_dims needs an input dim and at least one layer dim")
        if any(d < 1 for d in self.layer_dims):
            raise ConfigError("all layer dims must be >= 1")
        if self.num_views < 1 or self.num_classes < 1:
            raise ConfigError("num_views and num_classes must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}; "
                              f"choose from {sorted(_ACTIVATIONS)}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1


@dataclass
class ModelParams:
    """Trainable weights; flat serialization order is the declaration
    order per layer: intra (per view), view heads (per view), fused head,
    inter mixing."""
    intra: list[list[Tensor]]       # [layer][view] (d_in, d_out)
    view_heads: list[list[Tensor]]  # [layer][view] (d_out, K)
    fused_heads: list[Tensor]       # [layer] (d_out, K)
    inter: list[Tensor]             # [layer] (V, V)

    def layer_parameters(self, layer: int) -> list[Tensor]:
        return (list(self.intra[layer]) + list(self.view_heads[layer])
                + [self.fused_heads[layer], self.inter[layer]])

    def all_parameters(self) -> list[Tensor]:
        out: list[Tensor] = []
        for layer in range(len(self.intra)):
            out.extend(self.layer_parameters(layer))
        return out


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, ...]) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_params(cfg: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(cfg.seed)
    v, k = cfg.num_views, cfg.num_classes
    intra, view_heads, fused_heads, inter = [], [], [], []
    for layer in range(cfg.num_layers):
        d_in, d_out = cfg.layer_dims[layer], cfg.layer_dims[layer + 1]
        intra.append([_xavier(rng, d_in, d_out, (d_in, d_out)) for _ in range(v)])
        view_heads.append([_xavier(rng, d_out, k, (d_out, k)) for _ in range(v)])
        fused_heads.append(_xavier(rng, d_out, k, (d_out, k)))
        inter.append(_xavier(rng, v, v, (v, v)))
    return ModelParams(intra=intra, view_heads=view_heads,
                       fused_heads=fused_heads, inter=inter)


@dataclass
class ForwardTrace:
    view_alphas: list[list[Tensor]] = field(default_factory=list)   # [layer][view] (K,)
    fused_alphas: list[Tensor] = field(default_factory=list)        # [layer] (K,)
    opinions: list[list[Opinion]] = field(default_factory=list)     # [layer][view]
    agg_params: list[np.ndarray] = field(default_factory=list)      # [layer] (V,)
    features: list[list[Tensor]] = field(default_factory=list)      # [layer][view] post-mix
    intermediates: list[list[Tensor]] = field(default_factory=list) # [layer][view] pre-mix
    embedding: Tensor | None = None


def intra_forward(adjacency, features, weight, activation: str = "relu") -> Tensor:
    """One-hop convolution: activation(A @ F @ W)."""
    return _ACTIVATIONS[activation](T.matmul(T.matmul(adjacency, features), weight))


def view_evidence(f_star: Tensor, head: Tensor) -> Tensor:
    """Per-class evidence: softplus head output, mean-pooled over nodes."""
    return T.mean(T.softplus(T.matmul(f_star, head)), axis=0)


def aggregation_params(opinions: list[Opinion]) -> np.ndarray:
    """Quality score per view: variance(beliefs) / uncertainty."""
    return np.array([aggregation_param(o) for o in opinions], dtype=np.float64)


def inter_forward(f_stars: list[Tensor], p, w_inter: Tensor,
                  activation: str = "relu") -> list[Tensor]:
    """Mix views: output view j is activation(sum_i W[i, j] * p_i * F_i)."""
    v = len(f_stars)
    if w_inter.shape != (v, v):
        raise ShapeError(f"inter_forward: mixing matrix {w_inter.shape} for {v} views")
    p_list = [p[i] if isinstance(p[i], Tensor) else Tensor(float(p[i])) for i in range(v)]
    act = _ACTIVATIONS[activation]
    outs = []
    for j in range(v):
        acc = None
        for i in range(v):
            term = T.mul(T.mul(T.getitem(w_inter, (i, j)), p_list[i]), f_stars[i])
            acc = term if acc is None else T.add(acc, term)
        outs.append(act(acc))
    return outs


def readout(f_finals: list[Tensor]) -> Tensor:
    """Mean over views and nodes of the last-layer features."""
    acc = None
    for f in f_finals:
        m = T.mean(f, axis=0)
        acc = m if acc is None else T.add(acc, m)
    return T.div(acc, float(len(f_finals)))


def _opinion_from_alpha(alpha: Tensor, k: int) -> tuple[Opinion, Tensor, Tensor]:
    """Plain opinion plus (belief, uncertainty) tensors from alpha."""
    s = T.sum_(alpha)
    b = T.div(T.sub(alpha, 1.0), s)
    u = T.div(float(k), s)
    return Opinion(belief=b.data.copy(), uncertainty=u.item()), b, u


def model_forward(g: MultiViewGraph, params: ModelParams, cfg: ModelConfig,
                  reliable_aggregation: bool = True) -> ForwardTrace:
    v, k = cfg.num_views, cfg.num_classes
    if len(g.views) != v:
        raise ShapeError(f"model_forward: instance {g.id!r} has {len(g.views)} views, "
                         f"model expects {v}")
    if g.views[0].features.shape[1] != cfg.layer_dims[0]:
        raise ShapeError(f"model_forward: feature dim {g.views[0].features.shape[1]} != "
                         f"model input dim {cfg.layer_dims[0]}")
    adjs = [Tensor(view.adjacency) for view in g.views]
    feats = [Tensor(view.features) for view in g.views]
    trace = ForwardTrace()
    for layer in range(cfg.num_layers):
        f_stars = [intra_forward(adjs[j], feats[j], params.intra[layer][j], cfg.activation)
                   for j in range(v)]
        alphas, opinions, p_list = [], [], []
        for j in range(v):
            evidence = view_evidence(f_stars[j], params.view_heads[layer][j])
            alpha = T.add(evidence, 1.0)
            opinion, b, u = _opinion_from_alpha(alpha, k)
            alphas.append(alpha)
            opinions.append(opinion)
            if not reliable_aggregation:
                p_list.append(Tensor(1.0))
            elif cfg.backprop_aggregation:
                p_list.append(T.div(T.variance(b), u))
            else:
                p_list.append(Tensor(aggregation_param(opinion)))
        p_values = np.array([p.item() for p in p_list])
        if np.any(p_values < 0.0):
            raise ShapeError("model_forward: negative aggregation parameter")
        f_next = inter_forward(f_stars, p_list, params.inter[layer], cfg.activation)
        fused = T.div(_sum_tensors(f_next), float(v))
        fused_alpha = T.add(view_evidence(fused, params.fused_heads[layer]), 1.0)
        trace.view_alphas.append(alphas)
        trace.fused_alphas.append(fused_alpha)
        trace.opinions.append(opinions)
        trace.agg_params.append(p_values)
        trace.intermediates.append(f_stars)
        trace.features.append(f_next)
        feats = f_next
    trace.embedding = readout(feats)
    return trace


def _sum_tensors(tensors: list[Tensor]) -> Tensor:
    acc = tensors[0]
    for t in tensors[1:]:
        acc = T.add(acc, t)
    return acc


def _np_softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _np_sigmoid(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    out = np.empty_like(x, dtype=np.float64)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _np_activation(name: str):
    if name == "relu":
        return lambda x: np.maximum(x, 0.0)
    if name == "sigmoid":
        return _np_sigmoid
    if name == "softplus":
        return _np_softplus
    raise ConfigError(f"unknown activation {name!r}")


def uncertainty_probe(params: ModelParams, cfg: ModelConfig, view: int,
                      features: np.ndarray):
    """First-layer uncertainty as a function of the adjacency alone.

    Weights are read once (frozen); the returned callable is what the
    structural-enhancement loop consumes.
    """
    w_intra = params.intra[0][view].data.copy()
    w_head = params.view_heads[0][view].data.copy()
    feats = np.asarray(features, dtype=np.float64)
    act = _np_activation(cfg.activation)
    k = cfg.num_classes

    def probe(adjacency: np.ndarray) -> float:
        h = act(np.asarray(adjacency) @ feats @ w_intra)
        evidence = _np_softplus(h @ w_head).mean(axis=0)
        return k / float(np.sum(evidence + 1.0))

    return probe


def embed_dataset(ds: Dataset, params: ModelParams, cfg: ModelConfig,
                  reliable_aggregation: bool = True) -> np.ndarray:
    """Embedding matrix (one row per instance), computed without taping."""
    rows = []
    with T.no_grad():
        for g in ds.instances:
            trace = model_forward(g, params, cfg, reliable_aggregation=reliable_aggregation)
            rows.append(trace.embedding.data.copy())
    return np.stack(rows, axis=0)


def save_checkpoint(path: str, params: ModelParams, cfg: ModelConfig,
                    flags: dict | None = None) -> None:
    flat: list[float] = []
    for p in params.all_parameters():
        flat.extend(p.data.ravel().tolist())
    payload = {
        "model": {
            "num_views": cfg.num_views,
            "num_classes": cfg.num_classes,
            "layer_dims": list(cfg.layer_dims),
            "activation": cfg.activation,
            "seed": cfg.seed,
            "backprop_aggregation": cfg.backprop_aggregation,
        },
        "flags": dict(flags or {}),
        "params": flat,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str) -> tuple[ModelParams, ModelConfig, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    cfg = ModelConfig(**payload["model"])
    params = init_params(cfg)
    flat = np.asarray(payload["params"], dtype=np.float64)
    offset = 0
    for p in params.all_parameters():
        size = p.data.size
        if offset + size > flat.size:
            raise ConfigError(f"checkpoint {path!r}: parameter array too short")
        p.data = flat[offset:offset + size].reshape(p.data.shape).copy()
        offset += size
    if offset != flat.size:
        raise ConfigError(f"checkpoint {path!r}: parameter array has {flat.size - offset} "
                          "unused values")
    return params, cfg, payload.get("flags", {})
