"""Downstream protocol: frozen embeddings -> linear SVM and k-means,
scored with macro/micro F1, NMI and ARI.

The SVM is one-vs-rest, trained by full-batch subgradient descent on the
L2-regularized hinge objective 0.5*||w||^2 + C * sum_i hinge_i with
C = 1.0, 200 epochs, step 0.01/sqrt(t), on features standardized to the
training set's mean and standard deviation.  No external solver, so runs
are exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import stratified_indices
from .errors import EvaluationError

_SVM_EPOCHS = 200
_SVM_C = 1.0
_SVM_LR = 0.01


def _standardizer(train_x: np.ndarray):
    mean = train_x.mean(axis=0)
    std = train_x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return lambda x: (x - mean) / std


def _fit_binary_svm(x: np.ndarray, y_pm: np.ndarray) -> tuple[np.ndarray, float]:
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for t in range(1, _SVM_EPOCHS + 1):
        lr = _SVM_LR / math.sqrt(t)
        margins = y_pm * (x @ w + b)
        viol = margins < 1.0
        grad_w = w - _SVM_C * (y_pm[viol, None] * x[viol]).sum(axis=0)
        grad_b = -_SVM_C * y_pm[viol].sum()
        w = w - lr * grad_w
        b = b - lr * grad_b
    return w, b


def linear_svm(train: tuple[np.ndarray, np.ndarray],
               test_embeddings: np.ndarray) -> np.ndarray:
    """One-vs-rest linear SVM; returns predicted labels for the test rows."""
    train_x, train_y = np.asarray(train[0], dtype=np.float64), np.asarray(train[1])
    test_x = np.asarray(test_embeddings, dtype=np.float64)
    if train_x.ndim != 2 or test_x.ndim != 2 or train_x.shape[1] != test_x.shape[1]:
        raise EvaluationError(f"linear_svm: embedding dims differ, "
                              f"{train_x.shape} vs {test_x.shape}")
    classes = np.unique(train_y)
    if classes.size < 2:
        raise EvaluationError("linear_svm: training set contains a single class")
    standardize = _standardizer(train_x)
    xs = standardize(train_x)
    xt = standardize(test_x)
    scores = np.empty((xt.shape[0], classes.size))
    for i, cls in enumerate(classes):
        y_pm = np.where(train_y == cls, 1.0, -1.0)
        w, b = _fit_binary_svm(xs, y_pm)
        scores[:, i] = xt @ w + b
    return classes[np.argmax(scores, axis=1)]


def _kmeans_once(x: np.ndarray, k: int, rng: np.random.Generator,
                 max_iters: int = 100) -> tuple[np.ndarray, float]:
    n = x.shape[0]
    # k-means++ style seeding: first centre uniform, then D^2-weighted.
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centers[c:] = x[rng.integers(n, size=k - c)]
            break
        probs = d2 / total
        centers[c] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        dists = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dists, axis=1)
        for c in range(k):
            members = new_assign == c
            if not np.any(members):
                # Re-seed an empty cluster at the point farthest from its centre.
                far = int(np.argmax(np.min(dists, axis=1)))
                centers[c] = x[far]
                new_assign[far] = c
            else:
                centers[c] = x[members].mean(axis=0)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign
    inertia = float(np.sum((x - centers[assign]) ** 2))
    return assign, inertia


def kmeans(embeddings: np.ndarray, k: int, seed: int,
           restarts: int = 10) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts``."""
    x = np.asarray(embeddings, dtype=np.float64)
    if k > x.shape[0]:
        raise EvaluationError(f"kmeans: k={k} exceeds {x.shape[0]} points")
    best_assign, best_inertia = None, math.inf
    for r in range(restarts):
        rng = np.random.default_rng((seed, r))
        assign, inertia = _kmeans_once(x, k, rng)
        if inertia < best_inertia:
            best_assign, best_inertia = assign, inertia
    return best_assign


def _check_labels(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(y_true), np.asarray(y_pred)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError(f"label arrays must be 1-d and equal length, "
                              f"got {a.shape} and {b.shape}")
    return a, b


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1; a class absent from both true and
    predicted labels contributes 0."""
    t, p = _check_labels(y_true, y_pred)
    classes = np.unique(np.concatenate([t, p]))
    scores = []
    for cls in classes:
        tp = np.sum((t == cls) & (p == cls))
        fp = np.sum((t != cls) & (p == cls))
        fn = np.sum((t == cls) & (p != cls))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def micro_f1(y_true, y_pred) -> float:
    """F1 of pooled counts; equals accuracy for single-label problems."""
    t, p = _check_labels(y_true, y_pred)
    classes = np.unique(np.concatenate([t, p]))
    tp = fp = fn = 0
    for cls in classes:
        tp += np.sum((t == cls) & (p == cls))
        fp += np.sum((t != cls) & (p == cls))
        fn += np.sum((t == cls) & (p != cls))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom > 0 else 0.0


def _contingency(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    rows = {v: i for i, v in enumerate(np.unique(t))}
    cols = {v: i for i, v in enumerate(np.unique(p))}
    table = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for a, b in zip(t, p):
        table[rows[a], cols[b]] += 1
    return table


def nmi(y_true, y_clusters) -> float:
    """Mutual information normalized by the arithmetic mean of the two
    entropies (natural log); degenerate 0/0 cases are defined as 0."""
    t, p = _check_labels(y_true, y_clusters)
    n = t.size
    table = _contingency(t, p)
    pi = table.sum(axis=1) / n
    pj = table.sum(axis=0) / n
    mi = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            nij = table[i, j]
            if nij > 0:
                pij = nij / n
                mi += pij * math.log(pij / (pi[i] * pj[j]))
    h_t = -float(np.sum(pi * np.log(pi, where=pi > 0, out=np.zeros_like(pi))))
    h_c = -float(np.sum(pj * np.log(pj, where=pj > 0, out=np.zeros_like(pj))))
    denom = 0.5 * (h_t + h_c)
    if denom == 0.0 or mi <= 0.0:
        return 0.0
    return min(mi / denom, 1.0)


def ari(y_true, y_clusters) -> float:
    """Adjusted Rand index via the pair-counting contingency formula."""
    t, p = _check_labels(y_true, y_clusters)
    n = t.size
    if n < 2:
        raise EvaluationError("ari: need at least two points")
    table = _contingency(t, p)
    sum_ij = sum(math.comb(int(nij), 2) for nij in table.ravel())
    sum_a = sum(math.comb(int(a), 2) for a in table.sum(axis=1))
    sum_b = sum(math.comb(int(b), 2) for b in table.sum(axis=0))
    total = math.comb(n, 2)
    expected = sum_a * sum_b / total
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0 if sum_ij == expected else 0.0
    return float((sum_ij - expected) / (maximum - expected))


@dataclass
class EvalReport:
    ratios: list[float]
    seeds: list[int]
    per_seed: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"ratios": self.ratios, "seeds": self.seeds,
                "per_seed": self.per_seed, "summary": self.summary}

    def to_csv(self) -> str:
        cols = []
        for r in self.ratios:
            cols.extend([f"ma_f1@{r}", f"mi_f1@{r}"])
        cols.extend(["nmi", "ari"])
        lines = ["seed," + ",".join(cols)]
        for entry in self.per_seed:
            vals = []
            for r in self.ratios:
                vals.extend([entry["ma_f1"][str(r)], entry["mi_f1"][str(r)]])
            vals.extend([entry["nmi"], entry["ari"]])
            lines.append(str(entry["seed"]) + "," + ",".join(f"{v:.6f}" for v in vals))
        for stat in ("mean", "std"):
            vals = []
            for r in self.ratios:
                vals.extend([self.summary[f"ma_f1@{r}"][stat], self.summary[f"mi_f1@{r}"][stat]])
            vals.extend([self.summary["nmi"][stat], self.summary["ari"][stat]])
            lines.append(stat + "," + ",".join(f"{v:.6f}" for v in vals))
        return "\n".join(lines) + "\n"


def evaluate(embeddings: np.ndarray, labels: np.ndarray,
             ratios: list[float] = (0.2, 0.6),
             seeds: list[int] = tuple(range(10))) -> EvalReport:
    """Per seed: stratified SVM splits at each ratio plus one k-means run;
    aggregated as mean and standard deviation over seeds."""
    z = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if z.shape[0] != y.shape[0]:
        raise EvaluationError(f"evaluate: {z.shape[0]} embeddings vs {y.shape[0]} labels")
    k = int(np.unique(y).size)
    report = EvalReport(ratios=list(ratios), seeds=list(seeds))
    for seed in seeds:
        entry = {"seed": int(seed), "ma_f1": {}, "mi_f1": {}}
        for ratio in ratios:
            train_idx, test_idx = stratified_indices(y, ratio, seed)
            preds = linear_svm((z[train_idx], y[train_idx]), z[test_idx])
            entry["ma_f1"][str(ratio)] = macro_f1(y[test_idx], preds)
            entry["mi_f1"][str(ratio)] = micro_f1(y[test_idx], preds)
        clusters = kmeans(z, k, seed)
        entry["nmi"] = nmi(y, clusters)
        entry["ari"] = ari(y, clusters)
        report.per_seed.append(entry)
    summary = {}
    for ratio in ratios:
        for name in ("ma_f1", "mi_f1"):
            vals = np.array([e[name][str(ratio)] for e in report.per_seed])
            summary[f"{name}@{ratio}"] = {"mean": float(vals.mean()), "std": float(vals.std())}
    for name in ("nmi", "ari"):
        vals = np.array([e[name] for e in report.per_seed])
        summary[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    report.summary = summary
    return report
