"""Evidential loss, optimizers, and the warm-up / enhance / train schedule.

The per-instance loss sums, over layers, the digamma-based adjusted
cross-entropy of the fused evidence and of every per-view evidence, plus
a per-layer (non-squared) L2 norm of that layer's weights.  Training is
full batch: per-instance losses are scaled by 1/|train| and their
gradients accumulated before each optimizer step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import Dataset, GraphView, MultiViewGraph, Split
from .enhancement import reliable_enhance
from .errors import ConfigError, DomainError, TrainingDivergedError
from .model import (ForwardTrace, ModelConfig, ModelParams, init_params,
                    model_forward, uncertainty_probe)
from .tensor import Tensor


@dataclass
class TrainConfig:
    epochs: int = 60
    warmup_epochs: int | None = None  # defaults to 20% of epochs
    learning_rate: float = 0.01
    reg_lambda: float = 1e-4
    optimizer: str = "adam"
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    enhancement_enabled: bool = True
    reliable_aggregation_enabled: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.warmup_epochs is None:
            self.warmup_epochs = int(round(0.2 * self.epochs))
        if not (0 <= self.warmup_epochs <= self.epochs):
            raise ConfigError(f"need 0 <= warmup_epochs <= epochs, got "
                              f"{self.warmup_epochs} / {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.reg_lambda < 0:
            raise ConfigError("reg_lambda must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")


def ace_loss(alpha, y_onehot) -> Tensor:
    """Expected cross-entropy under Dirichlet(alpha):
    sum_k y_k * (digamma(S) - digamma(alpha_k))."""
    if isinstance(alpha, Tensor):
        a = alpha
    else:
        a = Tensor(getattr(alpha, "alpha", alpha))
    y = np.asarray(y_onehot, dtype=np.float64)
    if a.data.ndim != 1 or y.shape != a.data.shape:
        raise DomainError(f"ace_loss: alpha shape {a.data.shape} vs label shape {y.shape}")
    if np.any(a.data < 1.0):
        raise DomainError("ace_loss: alpha entries must be >= 1")
    if not (np.all((y == 0.0) | (y == 1.0)) and float(np.sum(y)) == 1.0):
        raise DomainError("ace_loss: label must be one-hot")
    s = T.sum_(a)
    return T.sum_(T.mul(Tensor(y), T.sub(T.digamma(s), T.digamma(a))))


def layer_l2_norm(params: ModelParams, layer: int) -> Tensor:
    """Non-squared L2 norm of the concatenation of one layer's weights."""
    total = None
    for p in params.layer_parameters(layer):
        sq = T.sum_(T.mul(p, p))
        total = sq if total is None else T.add(total, sq)
    return T.sqrt(total)


def total_loss(trace: ForwardTrace, y_onehot, params: ModelParams,
               reg_lambda: float) -> Tensor:
    """Per-instance objective: layer-wise fused + per-view evidential
    losses plus reg_lambda * per-layer weight norm."""
    if trace.embedding is None or not trace.fused_alphas:
        raise DomainError("total_loss: incomplete forward trace")
    loss = None
    for layer in range(len(trace.fused_alphas)):
        term = ace_loss(trace.fused_alphas[layer], y_onehot)
        for alpha in trace.view_alphas[layer]:
            term = T.add(term, ace_loss(alpha, y_onehot))
        if reg_lambda != 0.0:
            term = T.add(term, T.mul(float(reg_lambda), layer_l2_norm(params, layer)))
        loss = term if loss is None else T.add(loss, term)
    return loss


class Sgd:
    def __init__(self, params: list[Tensor], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad


class Adam:
    def __init__(self, params: list[Tensor], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            m_hat = self.m[i] / (1.0 - self.b1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.b2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(tcfg: TrainConfig, params: list[Tensor]):
    if tcfg.optimizer == "sgd":
        return Sgd(params, tcfg.learning_rate)
    return Adam(params, tcfg.learning_rate, tcfg.betas, tcfg.eps)


def one_hot(label: int, num_classes: int) -> np.ndarray:
    y = np.zeros(num_classes, dtype=np.float64)
    y[label] = 1.0
    return y


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    uncertainty_curves: list[list[float]] = field(default_factory=list)  # [view][epoch]
    agg_param_curves: list[list[float]] = field(default_factory=list)    # [view][epoch]
    final_mean_p: list[float] = field(default_factory=list)
    enhancement: list[dict] | None = None
    enhanced_dataset: Dataset | None = None  # runtime handle, not serialized

    def to_json_dict(self) -> dict:
        return {
            "losses": self.losses,
            "uncertainty_curves": self.uncertainty_curves,
            "agg_param_curves": self.agg_param_curves,
            "final_mean_p": self.final_mean_p,
            "enhancement": self.enhancement,
        }


def enhance_dataset(ds: Dataset, params: ModelParams, mcfg: ModelConfig
                    ) -> tuple[Dataset, list[dict]]:
    """Enhance every view of every instance with the frozen first-layer
    probe (labels are never consulted, so test instances are included)."""
    summaries: list[dict] = []
    new_instances: list[MultiViewGraph] = []
    for g in ds.instances:
        views = []
        for j, view in enumerate(g.views):
            probe = uncertainty_probe(params, mcfg, j, view.features)
            outcome = reliable_enhance(view, probe)
            views.append(GraphView(adjacency=outcome.enhanced_adjacency,
                                   features=view.features.copy(), instance_id=g.id))
            summaries.append({
                "id": g.id,
                "view": j,
                "trace": [float(u) for u in outcome.uncertainty_trace],
                "R": outcome.total_enhanced,
                "iterations": outcome.iterations,
            })
        new_instances.append(MultiViewGraph(id=g.id, label=g.label, views=views))
    enhanced = Dataset(instances=new_instances, num_classes=ds.num_classes,
                       num_views=ds.num_views, feature_dim=ds.feature_dim)
    return enhanced, summaries


def train(ds: Dataset, split: Split, mcfg: ModelConfig,
          tcfg: TrainConfig) -> tuple[ModelParams, TrainReport]:
    by_id = {g.id: g for g in ds.instances}
    missing = [i for i in split.train_ids + split.test_ids if i not in by_id]
    if missing:
        raise ConfigError(f"split references unknown instance ids: {missing[:3]}")

    params = init_params(mcfg)
    opt = _make_optimizer(tcfg, params.all_parameters())
    report = TrainReport(uncertainty_curves=[[] for _ in range(mcfg.num_views)],
                         agg_param_curves=[[] for _ in range(mcfg.num_views)])

    working = ds
    working_by_id = by_id
    enhanced_done = False

    def run_enhancement():
        nonlocal working, working_by_id, enhanced_done
        enhanced, summaries = enhance_dataset(working, params, mcfg)
        working = enhanced
        working_by_id = {g.id: g for g in enhanced.instances}
        report.enhancement = summaries
        report.enhanced_dataset = enhanced
        enhanced_done = True

    n_train = len(split.train_ids)
    labels = {g.id: g.label for g in ds.instances}
    for epoch in range(tcfg.epochs):
        if tcfg.enhancement_enabled and not enhanced_done and epoch == tcfg.warmup_epochs:
            run_enhancement()
        train_instances = [working_by_id[i] for i in split.train_ids]
        T.zero_grads(params.all_parameters())
        epoch_loss = 0.0
        u_sums = np.zeros(mcfg.num_views)
        p_sums = np.zeros(mcfg.num_views)
        for g in train_instances:
            trace = model_forward(g, params, mcfg,
                                  reliable_aggregation=tcfg.reliable_aggregation_enabled)
            y = one_hot(labels[g.id], mcfg.num_classes)
            loss = total_loss(trace, y, params, tcfg.reg_lambda)
            epoch_loss += loss.item()
            T.backward(T.mul(loss, 1.0 / n_train))
            u_sums += np.array([op.uncertainty for op in trace.opinions[0]])
            p_sums += np.mean(np.stack(trace.agg_params), axis=0)
        mean_loss = epoch_loss / n_train
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}", epoch)
        report.losses.append(mean_loss)
        for j in range(mcfg.num_views):
            report.uncertainty_curves[j].append(float(u_sums[j] / n_train))
            report.agg_param_curves[j].append(float(p_sums[j] / n_train))
        opt.step()
    if tcfg.enhancement_enabled and not enhanced_done:
        run_enhancement()  # schedule boundary: warmup consumed every epoch
    report.final_mean_p = [curve[-1] for curve in report.agg_param_curves]
    return params, report
