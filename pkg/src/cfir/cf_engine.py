"""Counterfactual search over term-frequency vectors.

k candidate vectors are optimized jointly under a three-part objective:

    (1/k) * sum_i hinge(f, c_i, y)             pull predictions to label y
  + (lambda1/k) * sum_i proximity(c_i, x)      stay close to the original
  - lambda2 * det(kernel(c_1..c_k))            keep candidates diverse

For differentiable models the search is fixed-step gradient descent on a
continuous relaxation (proximity = sum_p |c_p - x_p| / cap_p); for forests it
is hill climbing over integer coordinate moves with the same objective and
budget. Candidates are then rounded, clamped to [0, cap], and filtered to the
add-only subset (c >= x coordinate-wise); one survivor is drawn at random and
its excess counts over x are read off as the explanation words.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classifier import LogisticModel, logit, predict
from .corpus import Document
from .importance import Vocabulary


@dataclass
class CfConfig:
    k: int = 3
    lambda1: float = 1.0
    lambda2: float = 0.5
    max_iter: int = 500
    step: float = 0.05
    desired_label: int = 1
    caps: np.ndarray | None = None  # per-coordinate upper bounds, >= x
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be >= 0")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step <= 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if self.desired_label not in (0, 1):
            raise ValueError("desired label must be 0 or 1")


@dataclass
class CounterfactualResult:
    chosen: np.ndarray | None
    candidates: np.ndarray  # (k, |V|) rounded integer-valued vectors
    explanation: Counter
    success: bool
    add_only_found: bool
    flipped: bool
    loss_trace: list[float] = field(default_factory=list)
    attempts: int = 1
    seed: int = 0


def yloss(model, c: np.ndarray, desired_label: int) -> float:
    """Hinge loss on the model logit: max(0, 1 - z * logit), z = +-1."""
    z = 1.0 if desired_label == 1 else -1.0
    return max(0.0, 1.0 - z * logit(model, np.asarray(c, dtype=np.float64)))


def dist(c: np.ndarray, x: np.ndarray) -> int:
    """Categorical distance: number of coordinates where the vectors differ."""
    return int(np.count_nonzero(np.asarray(c) != np.asarray(x)))


def _det(mat: np.ndarray) -> float:
    if mat.shape == (1, 1):
        return float(mat[0, 0])
    return float(np.linalg.det(mat))


def diversity(candidates) -> float:
    """Determinant of the kernel K_ij = 1 / (1 + dist(c_i, c_j))."""
    cands = [np.asarray(c) for c in candidates]
    k = len(cands)
    kernel = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            kernel[i, j] = kernel[j, i] = 1.0 / (1.0 + dist(cands[i], cands[j]))
    return _det(kernel)


# ---------------------------------------------------------------------------
# Continuous relaxation
# ---------------------------------------------------------------------------


def _relaxed_pairwise_kernel(cands: np.ndarray, caps: np.ndarray) -> np.ndarray:
    diff = np.abs(cands[:, None, :] - cands[None, :, :]) / caps
    return 1.0 / (1.0 + diff.sum(axis=2))


def _cofactor_matrix(mat: np.ndarray) -> np.ndarray:
    """d det / d M_ij, by minors; robust for singular matrices."""
    k = mat.shape[0]
    if k == 1:
        return np.ones((1, 1))
    cof = np.empty((k, k))
    rows = np.arange(k)
    for i in range(k):
        for j in range(k):
            minor = mat[np.ix_(rows != i, rows != j)]
            cof[i, j] = (-1.0) ** (i + j) * _det(minor)
    return cof


def relaxed_objective(model, cands: np.ndarray, x: np.ndarray, caps: np.ndarray,
                      cfg: CfConfig) -> float:
    k = cands.shape[0]
    z = 1.0 if cfg.desired_label == 1 else -1.0
    if isinstance(model, LogisticModel):
        logits = cands @ model.weights
    else:
        logits = np.array([logit(model, c) for c in cands])
    hinge = np.maximum(0.0, 1.0 - z * logits)
    proximity = (np.abs(cands - x) / caps).sum(axis=1)
    det = _det(_relaxed_pairwise_kernel(cands, caps))
    return float(hinge.mean() + cfg.lambda1 * proximity.mean() - cfg.lambda2 * det)


def relaxed_gradient(model: LogisticModel, cands: np.ndarray, x: np.ndarray,
                     caps: np.ndarray, cfg: CfConfig) -> np.ndarray:
    """Gradient of the relaxed objective for differentiable models.
    Subgradients are 0 at the hinge point and at |c_p - x_p| = 0."""
    k = cands.shape[0]
    z = 1.0 if cfg.desired_label == 1 else -1.0
    grad = np.zeros_like(cands)

    logits = cands @ model.weights
    active = (1.0 - z * logits) > 0.0
    grad[active] = -z / k * model.weights

    grad += (cfg.lambda1 / k) * np.sign(cands - x) / caps

    kernel = _relaxed_pairwise_kernel(cands, caps)
    cof = _cofactor_matrix(kernel)
    # dK_ij/dD_ij = -K_ij^2; D_ij depends on rows i and j symmetrically.
    coeff = cof * (-(kernel ** 2))
    sign = np.sign(cands[:, None, :] - cands[None, :, :]) / caps
    ddet = 2.0 * (coeff[:, :, None] * sign).sum(axis=1)
    grad -= cfg.lambda2 * ddet
    return grad


def _descend(model, cands, x, caps, cfg, iters):
    trace = []
    for _ in range(iters):
        trace.append(relaxed_objective(model, cands, x, caps, cfg))
        cands = cands - cfg.step * relaxed_gradient(model, cands, x, caps, cfg)
    trace.append(relaxed_objective(model, cands, x, caps, cfg))
    return cands, trace


def _hill_climb(model, cands, x, caps, cfg, iters, rng):
    """Integer coordinate moves, strict-improvement acceptance; the budget is
    iters rounds of one proposal per candidate."""
    cands = np.rint(cands)
    current = relaxed_objective(model, cands, x, caps, cfg)
    trace = [current]
    n = cands.shape[1]
    for _ in range(iters):
        for i in range(cands.shape[0]):
            p = int(rng.integers(n))
            delta = 1.0 if rng.integers(2) else -1.0
            new_val = cands[i, p] + delta
            if new_val < 0.0 or new_val > caps[p]:
                continue
            old_val = cands[i, p]
            cands[i, p] = new_val
            candidate_loss = relaxed_objective(model, cands, x, caps, cfg)
            if candidate_loss < current:
                current = candidate_loss
            else:
                cands[i, p] = old_val
        trace.append(current)
    return cands, trace


def generate(model, d_vec: np.ndarray, cfg: CfConfig, vocab: Vocabulary) -> CounterfactualResult:
    """Run the candidate search and post-selection for one document vector.

    When no rounded candidate satisfies the add-only constraint the search is
    retried once with a fresh seed and a doubled iteration budget; a second
    miss yields a failure result rather than an exception.
    """
    cfg.validate()
    if not getattr(model, "trained", False):
        raise ValueError("model is not trained")
    x = np.asarray(d_vec, dtype=np.float64)
    if cfg.caps is None:
        raise ValueError("cfg.caps must be set")
    caps = np.asarray(cfg.caps, dtype=np.float64)
    if caps.shape != x.shape:
        raise ValueError("caps and feature vector length differ")
    if np.any(caps < x):
        raise ValueError("caps must dominate the original vector")

    rounded = None
    add_only: list[int] = []
    trace: list[float] = []
    rng = None
    attempts = 0
    for attempt in range(2):
        attempts = attempt + 1
        iters = cfg.max_iter * (2 ** attempt)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(attempt,))
        )
        cands = rng.uniform(0.0, caps, size=(cfg.k, x.size))
        if getattr(model, "differentiable", False):
            cands, trace = _descend(model, cands, x, caps, cfg, iters)
        else:
            cands, trace = _hill_climb(model, cands, x, caps, cfg, iters, rng)
        rounded = np.clip(np.rint(cands), 0.0, caps)
        add_only = [i for i in range(cfg.k) if np.all(rounded[i] >= x)]
        if add_only:
            break

    if not add_only:
        return CounterfactualResult(
            chosen=None, candidates=rounded, explanation=Counter(),
            success=False, add_only_found=False, flipped=False,
            loss_trace=trace, attempts=attempts, seed=cfg.seed,
        )

    chosen = rounded[add_only[int(rng.integers(len(add_only)))]]
    flipped = predict(model, chosen) == cfg.desired_label
    explanation = extract_explanation(chosen, x, vocab)
    return CounterfactualResult(
        chosen=chosen, candidates=rounded, explanation=explanation,
        success=flipped, add_only_found=True, flipped=flipped,
        loss_trace=trace, attempts=attempts, seed=cfg.seed,
    )


def extract_explanation(c: np.ndarray, d_vec: np.ndarray, vocab: Vocabulary) -> Counter:
    """Words whose count in c exceeds the original vector, with multiplicity
    c_j - tf_j."""
    c = np.asarray(c, dtype=np.float64)
    x = np.asarray(d_vec, dtype=np.float64)
    counts = Counter()
    for j in np.nonzero(c > x)[0]:
        counts[vocab.words[int(j)]] = int(round(c[j] - x[j]))
    return counts


def apply_explanation(doc: Document, explanation: Counter) -> Document:
    """Append the explanation words (with multiplicity, in sorted order) to
    the document; term vectors add linearly under this operation."""
    if not explanation:
        return doc
    added = []
    for word in sorted(explanation):
        added.extend([word] * explanation[word])
    tokens = doc.tokens + tuple(added)
    raw = doc.raw_text + (" " if doc.raw_text else "") + " ".join(added)
    return Document(doc_id=doc.doc_id, raw_text=raw, tokens=tokens, length=len(tokens))
