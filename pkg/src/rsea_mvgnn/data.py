"""Multi-view graph data model, JSON on-disk format, splits and a
synthetic generator with controllable view quality.

A dataset file is UTF-8 JSON:

    { "num_classes": K, "num_views": V, "feature_dim": D,
      "instances": [ { "id": "...", "label": 0,
        "views": [ {"adjacency": [[...]], "features": [[...]]}, ... ] }, ... ] }

Adjacency matrices must be square, non-negative, with zero diagonal;
every view of an instance must share the node count.  Violations are
load errors, not warnings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DatasetParseError,
    InconsistentViewsError,
    InvalidLabelError,
    NegativeEdgeWeightError,
    NonzeroDiagonalError,
    SplitError,
)


@dataclass
class GraphView:
    adjacency: np.ndarray
    features: np.ndarray
    instance_id: str = ""

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        self.features = np.asarray(self.features, dtype=np.float64)
        a, f, iid = self.adjacency, self.features, self.instance_id
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InconsistentViewsError(
                f"instance {iid!r}: adjacency must be square, got {a.shape}", iid)
        if f.ndim != 2 or f.shape[0] != a.shape[0]:
            raise InconsistentViewsError(
                f"instance {iid!r}: features have {f.shape[0] if f.ndim == 2 else '?'} rows "
                f"for {a.shape[0]} nodes", iid)
        if np.any(a < 0.0):
            raise NegativeEdgeWeightError(
                f"instance {iid!r}: adjacency contains a negative entry", iid)
        if np.any(np.diagonal(a) != 0.0):
            raise NonzeroDiagonalError(
                f"instance {iid!r}: adjacency diagonal must be zero", iid)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(f))):
            raise DatasetParseError(f"instance {iid!r}: non-finite matrix entry", iid)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]


@dataclass
class MultiViewGraph:
    id: str
    label: int
    views: list[GraphView]

    def __post_init__(self):
        if not self.views:
            raise InconsistentViewsError(f"instance {self.id!r}: needs at least one view", self.id)
        n = self.views[0].num_nodes
        for j, v in enumerate(self.views):
            if v.num_nodes != n:
                raise InconsistentViewsError(
                    f"instance {self.id!r}: view {j} has {v.num_nodes} nodes, view 0 has {n}",
                    self.id)

    @property
    def num_nodes(self) -> int:
        return self.views[0].num_nodes


@dataclass
class Dataset:
    instances: list[MultiViewGraph]
    num_classes: int
    num_views: int
    feature_dim: int

    def __post_init__(self):
        seen = [False] * self.num_classes
        for g in self.instances:
            if len(g.views) != self.num_views:
                raise InconsistentViewsError(
                    f"instance {g.id!r}: has {len(g.views)} views, dataset declares "
                    f"{self.num_views}", g.id)
            for j, v in enumerate(g.views):
                if v.features.shape[1] != self.feature_dim:
                    raise InconsistentViewsError(
                        f"instance {g.id!r}: view {j} feature dim "
                        f"{v.features.shape[1]} != {self.feature_dim}", g.id)
            if not (0 <= g.label < self.num_classes):
                raise InvalidLabelError(
                    f"instance {g.id!r}: label {g.label} outside [0, {self.num_classes})", g.id)
            seen[g.label] = True
        if not all(seen):
            missing = [k for k, s in enumerate(seen) if not s]
            raise InvalidLabelError(f"classes {missing} have no instances")

    def __len__(self) -> int:
        return len(self.instances)

    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.instances], dtype=np.int64)

    def by_id(self, instance_id: str) -> MultiViewGraph:
        for g in self.instances:
            if g.id == instance_id:
                return g
        raise KeyError(instance_id)


@dataclass
class Split:
    train_ids: list[str]
    test_ids: list[str]
    train_ratio: float


def load_dataset(path: str) -> Dataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetParseError(f"cannot read dataset file {path!r}: {e}") from e
    try:
        num_classes = int(raw["num_classes"])
        num_views = int(raw["num_views"])
        feature_dim = int(raw["feature_dim"])
        entries = raw["instances"]
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetParseError(f"dataset file {path!r}: malformed header: {e}") from e
    instances = []
    for entry in entries:
        try:
            iid = str(entry["id"])
            label = int(entry["label"])
            views_raw = entry["views"]
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetParseError(f"dataset file {path!r}: malformed instance entry: {e}") from e
        views = []
        for view in views_raw:
            try:
                adjacency = view["adjacency"]
                features = view["features"]
            except (KeyError, TypeError) as e:
                raise DatasetParseError(f"instance {iid!r}: malformed view entry: {e}", iid) from e
            views.append(GraphView(adjacency=adjacency, features=features, instance_id=iid))
        instances.append(MultiViewGraph(id=iid, label=label, views=views))
    return Dataset(instances=instances, num_classes=num_classes,
                   num_views=num_views, feature_dim=feature_dim)


def save_dataset(ds: Dataset, path: str) -> None:
    payload = {
        "num_classes": ds.num_classes,
        "num_views": ds.num_views,
        "feature_dim": ds.feature_dim,
        "instances": [
            {
                "id": g.id,
                "label": g.label,
                "views": [
                    {"adjacency": v.adjacency.tolist(), "features": v.features.tolist()}
                    for v in g.views
                ],
            }
            for g in ds.instances
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


@dataclass
class SyntheticConfig:
    num_instances: int = 40
    num_classes: int = 2
    num_views: int = 2
    num_nodes: int = 20
    feature_dim: int = 8
    p_in: float = 0.9
    p_out: float = 0.1
    noise_views: frozenset[int] = field(default_factory=frozenset)
    feature_noise_sigma: float = 0.1
    duplicate_view: bool = False

    def __post_init__(self):
        self.noise_views = frozenset(int(v) for v in self.noise_views)
        if not (0.0 <= self.p_out < self.p_in <= 1.0):
            raise ConfigError(f"require 0 <= p_out < p_in <= 1, got p_in={self.p_in}, "
                              f"p_out={self.p_out}")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.num_instances < self.num_classes:
            raise ConfigError("need at least one instance per class")
        if any(v < 0 or v >= self.num_views for v in self.noise_views):
            raise ConfigError(f"noise_views {sorted(self.noise_views)} outside [0, {self.num_views})")
        if self.feature_dim < self.num_classes:
            raise ConfigError("feature_dim must be >= num_classes (one-hot community indicator)")
        if self.feature_noise_sigma < 0:
            raise ConfigError("feature_noise_sigma must be >= 0")
        if self.num_nodes < 1 or self.num_views < 1:
            raise ConfigError("num_nodes and num_views must be >= 1")


def _sample_symmetric(rng: np.random.Generator, n: int, edge_prob: np.ndarray) -> np.ndarray:
    """Undirected weighted adjacency: upper-triangle Bernoulli(edge_prob),
    present edges weighted Uniform(0, 1]."""
    adj = np.zeros((n, n), dtype=np.float64)
    iu, ju = np.triu_indices(n, k=1)
    present = rng.random(iu.size) < edge_prob[iu, ju]
    weights = 1.0 - rng.random(iu.size)  # (0, 1]
    vals = np.where(present, weights, 0.0)
    adj[iu, ju] = vals
    adj[ju, iu] = vals
    return adj


def generate_synthetic(cfg: SyntheticConfig, seed: int) -> Dataset:
    """Instances of class k carry k+1 balanced communities in informative
    views (block-model edges, one-hot community features plus Gaussian
    noise); noise views are class-independent Erdos-Renyi with pure
    Gaussian features."""
    rng = np.random.default_rng(seed)
    n, d, v_count = cfg.num_nodes, cfg.feature_dim, cfg.num_views
    instances = []
    for i in range(cfg.num_instances):
        label = i % cfg.num_classes
        n_comm = label + 1
        communities = (np.arange(n) * n_comm) // n
        same = communities[:, None] == communities[None, :]
        views: list[GraphView] = []
        iid = f"g{i:04d}"
        for j in range(v_count):
            if cfg.duplicate_view and j > 0:
                views.append(GraphView(adjacency=views[0].adjacency.copy(),
                                       features=views[0].features.copy(),
                                       instance_id=iid))
                continue
            if j in cfg.noise_views:
                prob = np.full((n, n), (cfg.p_in + cfg.p_out) / 2.0)
                adj = _sample_symmetric(rng, n, prob)
                feats = rng.normal(0.0, 1.0, size=(n, d))
            else:
                prob = np.where(same, cfg.p_in, cfg.p_out)
                adj = _sample_symmetric(rng, n, prob)
                feats = np.zeros((n, d), dtype=np.float64)
                feats[np.arange(n), communities] = 1.0
                if cfg.feature_noise_sigma > 0:
                    feats = feats + rng.normal(0.0, cfg.feature_noise_sigma, size=(n, d))
            views.append(GraphView(adjacency=adj, features=feats, instance_id=iid))
        instances.append(MultiViewGraph(id=iid, label=label, views=views))
    return Dataset(instances=instances, num_classes=cfg.num_classes,
                   num_views=v_count, feature_dim=d)


def stratified_indices(labels: np.ndarray, train_ratio: float,
                       seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; train count is round(ratio * class size),
    clamped so both sides stay non-empty."""
    if not (0.0 < train_ratio < 1.0):
        raise SplitError(f"train_ratio must be in (0, 1), got {train_ratio}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < 2:
            raise SplitError(f"class {cls} has {members.size} instance(s); cannot stratify")
        order = rng.permutation(members)
        n_train = int(math.floor(train_ratio * members.size + 0.5))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(order[:n_train].tolist())
        test_idx.extend(order[n_train:].tolist())
    return np.array(sorted(train_idx)), np.array(sorted(test_idx))


def make_split(ds: Dataset, train_ratio: float, seed: int) -> Split:
    train_idx, test_idx = stratified_indices(ds.labels(), train_ratio, seed)
    ids = [g.id for g in ds.instances]
    return Split(train_ids=[ids[i] for i in train_idx],
                 test_ids=[ids[i] for i in test_idx],
                 train_ratio=train_ratio)
