"""Explanation quality metrics.

Five scores per explanation family: concordance at the instance, mean
concordance over a neighborhood (fidelity), agreement at the greedy class-flip
counterfactual (prescriptivity), mean feature irrelevance (conciseness), and
expected pairwise similarity among repeated explanations (robustness).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_NORM, norm_constant, prob_distance
from .explain import Explanation
from .featurize import full_mask, mask_key


def local_concordance(f_at_x, g_at_x, norm: str = DEFAULT_NORM) -> float:
    """1 - |f(x) - g(x)| / max-distance: 1 iff the vectors agree, 0 only at
    maximal disagreement (distinct one-hot vectors)."""
    f_at_x = np.asarray(f_at_x, dtype=float)
    g_at_x = np.asarray(g_at_x, dtype=float)
    if f_at_x.shape != g_at_x.shape:
        raise ValueError(f"shape mismatch: {f_at_x.shape} vs {g_at_x.shape}")
    return 1.0 - prob_distance(f_at_x, g_at_x, norm) / norm_constant(norm, f_at_x.size)


def local_fidelity(f_outputs, g_outputs, norm: str = DEFAULT_NORM) -> float:
    """Mean concordance between black box and explanation over a neighborhood."""
    f_outputs = np.asarray(f_outputs, dtype=float)
    g_outputs = np.asarray(g_outputs, dtype=float)
    if f_outputs.shape != g_outputs.shape:
        raise ValueError(f"shape mismatch: {f_outputs.shape} vs {g_outputs.shape}")
    if f_outputs.ndim != 2 or len(f_outputs) == 0:
        raise ValueError("need a nonempty batch of probability vectors")
    scores = [local_concordance(f, g, norm) for f, g in zip(f_outputs, g_outputs)]
    return float(np.mean(scores))


@dataclass
class FlipResult:
    """Outcome of the greedy class-flip search; `removed` has 1 per dropped feature."""

    removed: np.ndarray
    steps: int
    flipped: bool

    def counterfactual_mask(self) -> np.ndarray:
        return (1 - self.removed).astype(np.uint8)


def find_class_flip(explanation: Explanation, x_mask=None) -> FlipResult:
    """Greedily remove the most helpful positive feature of the predicted class
    until the explanation's own argmax changes.

    Each step removes the still-present feature with the largest positive
    combined importance for the currently predicted class (ties: lowest index).
    Running out of positive features before the argmax moves is a regular
    outcome, not an error.
    """
    feature_count = explanation.feature_count
    mask = full_mask(feature_count) if x_mask is None else np.asarray(x_mask, dtype=np.uint8).copy()
    if not np.all(mask == 1):
        raise ValueError("flip search starts from the unperturbed all-ones mask")
    combined = explanation.matrices.combined
    original_class = int(np.argmax(explanation.predict_probs(mask)))

    removed = np.zeros(feature_count, dtype=np.uint8)
    for step in range(1, feature_count + 1):
        current_class = int(np.argmax(explanation.predict_probs(mask)))
        if current_class != original_class:
            return FlipResult(removed=removed, steps=step - 1, flipped=True)
        scores = combined[:, current_class].copy()
        scores[mask == 0] = -np.inf
        best = int(np.argmax(scores))  # argmax takes the lowest index on ties
        if not scores[best] > 0:
            return FlipResult(removed=removed, steps=step - 1, flipped=False)
        mask[best] = 0
        removed[best] = 1

    flipped = int(np.argmax(explanation.predict_probs(mask))) != original_class
    return FlipResult(removed=removed, steps=int(removed.sum()), flipped=flipped)


def prescriptivity(blackbox, featurizer, x, explanation: Explanation,
                   norm: str = DEFAULT_NORM) -> tuple[float | None, FlipResult]:
    """Concordance at the counterfactual the explanation proposes.

    Returns (score, flip). When no flip exists the score is None: a no-flip is
    reported separately, never coerced to 0 (which would mean maximal
    disagreement at the flip point, a different fact).
    """
    flip = find_class_flip(explanation)
    if not flip.flipped:
        return None, flip
    counter_mask = flip.counterfactual_mask()
    model_input = featurizer.mask_to_input(x, counter_mask)
    f_out = blackbox.evaluate_batch(model_input[None, ...], keys=[mask_key(counter_mask)])[0]
    g_out = explanation.predict_probs(counter_mask)
    return local_concordance(f_out, g_out, norm), flip


def conciseness(matrices, feature_count: int | None = None) -> float:
    """Mean irrelevance of the features: (1/(F-1)) * sum_i (1 - ||row_i||_1)
    over the rows of the absolute importance matrix.

    Row L1 norms can exceed 1 for more than two classes even after
    max-normalization, so rows are clipped to 1 before the sum; the final value
    is clamped into [0, 1] (the all-zero matrix would otherwise score F/(F-1)).
    """
    absolute = np.asarray(getattr(matrices, "absolute", matrices), dtype=float)
    if absolute.ndim != 2:
        raise ValueError("expected a (features, classes) absolute importance matrix")
    rows = absolute.shape[0]
    if feature_count is None:
        feature_count = rows
    if feature_count != rows:
        raise ValueError(f"feature_count {feature_count} != matrix rows {rows}")
    if feature_count < 2:
        raise ValueError("conciseness needs at least 2 features")
    row_norms = np.minimum(np.abs(absolute).sum(axis=1), 1.0)
    value = (1.0 - row_norms).sum() / (feature_count - 1)
    return float(np.clip(value, 0.0, 1.0))


def _relative_matrix(m) -> np.ndarray:
    if isinstance(m, Explanation):
        m = m.matrices
    return np.asarray(getattr(m, "relative", m), dtype=float)


def cosine_similarity(a, b) -> float:
    """Cosine of the flattened relative importance matrices, in [-1, 1].

    A zero matrix makes the direction undefined; that degenerate case warns and
    returns 0.
    """
    a = _relative_matrix(a)
    b = _relative_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        warnings.warn("zero importance matrix: cosine similarity undefined, returning 0", RuntimeWarning)
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    if np.array_equal(a, -b):
        return -1.0
    value = float(np.dot(a.ravel(), b.ravel()) / (norm_a * norm_b))
    return float(np.clip(value, -1.0, 1.0))


def magnitude_similarity(a, b) -> float:
    """Cosine similarity damped by relative magnitude mismatch.

    Equal Frobenius norms reduce it to the cosine similarity; perpendicular
    matrices score 0 regardless of magnitude.
    """
    a = _relative_matrix(a)
    b = _relative_matrix(b)
    cos = cosine_similarity(a, b)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    damp = 1.0 - abs(norm_a - norm_b) / max(norm_a, norm_b)
    return cos * damp


SIMILARITIES = {"cosine": cosine_similarity, "magnitude": magnitude_similarity}


def robustness(explanations, kind: str = "cosine") -> float:
    """Mean similarity over all unordered pairs of repeated explanations."""
    try:
        similarity = SIMILARITIES[kind]
    except KeyError:
        raise ValueError(f"unknown similarity kind {kind!r}; expected one of {sorted(SIMILARITIES)}") from None
    matrices = [_relative_matrix(e) for e in explanations]
    if len(matrices) < 2:
        raise ValueError("robustness needs at least 2 explanations")
    scores = [
        similarity(matrices[i], matrices[j])
        for i in range(len(matrices))
        for j in range(i + 1, len(matrices))
    ]
    return float(np.mean(scores))


@dataclass
class MetricReport:
    """Per-instance scores of the five metrics for one (method, budget) cell.

    prescriptivity is None when no explanation produced a class flip; the
    no_flip_count keeps that outcome visible instead of folding it into 0.
    """

    local_concordance: float
    local_fidelity: float
    prescriptivity: float | None
    no_flip_count: int
    conciseness: float
    robustness_cosine: float | None
    robustness_magnitude: float | None
    norm: str
    fidelity_size: int
    flip_steps: float | None

    def __post_init__(self):
        checks = [
            ("local_concordance", self.local_concordance, 0.0, 1.0),
            ("local_fidelity", self.local_fidelity, 0.0, 1.0),
            ("prescriptivity", self.prescriptivity, 0.0, 1.0),
            ("conciseness", self.conciseness, 0.0, 1.0),
            ("robustness_cosine", self.robustness_cosine, -1.0, 1.0),
            ("robustness_magnitude", self.robustness_magnitude, -1.0, 1.0),
        ]
        for name, value, low, high in checks:
            if value is not None and not (low - 1e-12 <= value <= high + 1e-12):
                raise ValueError(f"{name}={value} outside [{low}, {high}]")
