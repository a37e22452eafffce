"""Local surrogate classifiers: logistic regression trained by full-batch
gradient descent (differentiable, exposes logits and gradients) and a
bootstrap random forest with entropy splits (vote-fraction probabilities,
clamped log-odds logits)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .surrogate import SurrogateDataset

LOGIT_CLAMP = 15.0


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(features: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Mean binary cross-entropy of the intercept-free logistic model,
    computed in the numerically stable softplus form."""
    logits = features @ weights
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


def bce_gradient(features: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> np.ndarray:
    logits = features @ weights
    return features.T @ (sigmoid(logits) - labels) / features.shape[0]


@dataclass
class LogisticModel:
    differentiable = True
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trained: bool = False
    loss_trace: list[float] = field(default_factory=list)


def _check_two_classes(labels: np.ndarray) -> None:
    if labels.size == 0 or len(np.unique(labels)) < 2:
        raise ValueError("training requires examples of both classes")


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    learning_rate: float = 0.001,
    epochs: int = 1000,
) -> LogisticModel:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _check_two_classes(labels)
    weights = np.zeros(features.shape[1], dtype=np.float64)
    trace = []
    for _ in range(epochs):
        trace.append(bce_loss(features, labels, weights))
        weights -= learning_rate * bce_gradient(features, labels, weights)
    trace.append(bce_loss(features, labels, weights))
    return LogisticModel(weights=weights, trained=True, loss_trace=trace)


def train_logistic(
    data: SurrogateDataset, learning_rate: float = 0.001, epochs: int = 1000
) -> LogisticModel:
    return fit_logistic(data.features, data.labels, learning_rate, epochs)


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int = 0

    def is_leaf(self) -> bool:
        return self.left is None


def _entropy_from_counts(n1, n):
    """Binary entropy given positive counts n1 out of n (vectorized)."""
    n1 = np.asarray(n1, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    p = np.divide(n1, n, out=np.zeros_like(n1), where=n > 0)
    ent = np.zeros_like(p)
    for q in (p, 1.0 - p):
        mask = q > 0
        ent[mask] -= q[mask] * np.log2(q[mask])
    return ent


def _best_split(X: np.ndarray, y: np.ndarray, feat_indices: np.ndarray):
    """Lowest weighted-child-entropy (feature, threshold) over the sampled
    features; thresholds are midpoints between consecutive distinct values.
    Returns None when no feature admits a split."""
    m = y.size
    best = None  # (entropy, feature, threshold)
    for f in feat_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        vals = col[order]
        ones = np.cumsum(y[order])
        change = np.nonzero(vals[1:] > vals[:-1])[0]  # split after position i
        if change.size == 0:
            continue
        n_left = change + 1
        ones_left = ones[change]
        n_right = m - n_left
        ones_right = ones[-1] - ones_left
        weighted = (
            n_left * _entropy_from_counts(ones_left, n_left)
            + n_right * _entropy_from_counts(ones_right, n_right)
        ) / m
        i = int(np.argmin(weighted))
        cand = (float(weighted[i]), int(f), float((vals[change[i]] + vals[change[i] + 1]) / 2.0))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


def _grow_tree(X, y, depth, max_depth, n_sub, rng) -> TreeNode:
    ones = int(y.sum())
    majority = 1 if ones * 2 >= y.size else 0
    if depth >= max_depth or ones == 0 or ones == y.size or y.size < 2:
        return TreeNode(label=majority)
    feats = np.sort(rng.choice(X.shape[1], size=n_sub, replace=False))
    split = _best_split(X, y, feats)
    if split is None:
        return TreeNode(label=majority)
    _, feature, threshold = split
    mask = X[:, feature] <= threshold
    left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, n_sub, rng)
    right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, n_sub, rng)
    return TreeNode(feature=feature, threshold=threshold, left=left, right=right,
                    label=majority)


def _tree_vote(node: TreeNode, x: np.ndarray) -> int:
    while not node.is_leaf():
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


@dataclass
class ForestModel:
    differentiable = False
    trees: list[TreeNode] = field(default_factory=list)
    n_features: int = 0
    trained: bool = False
    seed: int = 0


def fit_forest(
    features: np.ndarray,
    labels: np.ndarray,
    n_estimators: int = 100,
    max_depth: int = 10,
    seed: int = 0,
) -> ForestModel:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_two_classes(labels)
    m, n_features = features.shape
    n_sub = max(1, int(np.sqrt(n_features)))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_estimators):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, m, size=m)  # bootstrap sample
        trees.append(_grow_tree(features[idx], labels[idx], 0, max_depth, n_sub, rng))
    return ForestModel(trees=trees, n_features=n_features, trained=True, seed=seed)


def train_forest(
    data: SurrogateDataset, n_estimators: int = 100, max_depth: int = 10, seed: int = 0
) -> ForestModel:
    return fit_forest(data.features, data.labels, n_estimators, max_depth, seed)


# ---------------------------------------------------------------------------
# Shared prediction surface
# ---------------------------------------------------------------------------


def _check_input(model, x: np.ndarray) -> np.ndarray:
    if not model.trained:
        raise ValueError("model is not trained")
    x = np.asarray(x, dtype=np.float64)
    n = model.weights.size if isinstance(model, LogisticModel) else model.n_features
    if x.shape != (n,):
        raise ValueError(f"feature vector has shape {x.shape}, expected ({n},)")
    return x


def prob(model, x: np.ndarray) -> float:
    x = _check_input(model, x)
    if isinstance(model, LogisticModel):
        return float(sigmoid(np.array([model.weights @ x]))[0])
    votes = sum(_tree_vote(t, x) for t in model.trees)
    return votes / len(model.trees)


def logit(model, x: np.ndarray) -> float:
    x = _check_input(model, x)
    if isinstance(model, LogisticModel):
        return float(model.weights @ x)
    p = prob(model, x)
    if p <= 0.0:
        return -LOGIT_CLAMP
    if p >= 1.0:
        return LOGIT_CLAMP
    return float(np.clip(np.log(p / (1.0 - p)), -LOGIT_CLAMP, LOGIT_CLAMP))


def predict(model, x: np.ndarray) -> int:
    """Threshold at probability 0.5; the tie goes to the positive class. For
    the logistic model this is decided on the logit so the equivalence
    predict(x) == [logit(x) >= 0] holds exactly in floating point."""
    if isinstance(model, LogisticModel):
        return 1 if logit(model, x) >= 0.0 else 0
    return 1 if prob(model, x) >= 0.5 else 0


MODEL_FORMAT_VERSION = 1
_MODEL_MAGIC = b"CFIRMDL\n"


def save_model(path: str, model) -> None:
    """Versioned binary blob for the run artifact directory."""
    import pickle

    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(pickle.dumps({"format_version": MODEL_FORMAT_VERSION, "model": model},
                              protocol=4))


def load_model(path: str):
    import pickle

    with open(path, "rb") as fh:
        if fh.read(len(_MODEL_MAGIC)) != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic)")
        payload = pickle.loads(fh.read())
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version")
    return payload["model"]


def model_to_jsonable(model) -> dict:
    """Plain-JSON dump of weights or trees for inspection."""
    if isinstance(model, LogisticModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "logistic",
            "weights": [float(w) for w in model.weights],
            "final_loss": model.loss_trace[-1] if model.loss_trace else None,
        }

    def node_to_dict(node: TreeNode):
        if node.is_leaf():
            return {"label": node.label}
        return {
            "feature": node.feature,
            "threshold": node.threshold,
            "left": node_to_dict(node.left),
            "right": node_to_dict(node.right),
        }

    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "forest",
        "n_features": model.n_features,
        "seed": model.seed,
        "trees": [node_to_dict(t) for t in model.trees],
    }
