"""Shared numeric primitives: softmax, its Jacobian, and probability-vector norms."""

from __future__ import annotations

import numpy as np

NORM_ORDS = {"one": 1, "two": 2, "infinity": np.inf}
DEFAULT_NORM = "two"


def as_logits(values) -> np.ndarray:
    """Validate a logit vector: 1-d, finite, at least two classes."""
    logits = np.asarray(values, dtype=float)
    if logits.ndim != 1 or logits.size < 2:
        raise ValueError(f"logit vector must be 1-d with >= 2 classes, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logit vector contains non-finite entries")
    return logits


def as_probabilities(values, tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector: entries in [0, 1], summing to 1 within `tol`."""
    probs = np.asarray(values, dtype=float)
    if probs.ndim != 1 or probs.size < 2:
        raise ValueError(f"probability vector must be 1-d with >= 2 classes, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise ValueError("probability vector contains non-finite entries")
    if probs.min() < -tol or probs.max() > 1.0 + tol:
        raise ValueError("probability entries outside [0, 1]")
    total = float(probs.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total}, not 1")
    return probs


def softmax(logits) -> np.ndarray:
    """Softmax over the last axis, with max-subtraction so |logit| up to ~700 cannot overflow."""
    arr = np.asarray(logits, dtype=float)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def softmax_jacobian(probs) -> np.ndarray:
    """Derivative of softmax expressed through its own output: diag(p) - p p^T."""
    p = np.asarray(probs, dtype=float)
    return np.diag(p) - np.outer(p, p)


def vector_norm(vec, norm: str = DEFAULT_NORM) -> float:
    try:
        order = NORM_ORDS[norm]
    except KeyError:
        raise ValueError(f"unknown norm {norm!r}; expected one of {sorted(NORM_ORDS)}") from None
    return float(np.linalg.norm(np.asarray(vec, dtype=float), ord=order))


def prob_distance(u, v, norm: str = DEFAULT_NORM) -> float:
    """Norm of u - v; zero exactly when the vectors coincide."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    return vector_norm(u - v, norm)


def norm_constant(norm: str = DEFAULT_NORM, class_count: int = 2) -> float:
    """Largest possible distance between two probability vectors under the norm.

    Attained at two distinct one-hot vectors, so the value is independent of the
    number of classes: sqrt(2) for the two-norm, 2 for the one-norm, 1 for the
    infinity-norm.
    """
    if class_count < 2:
        raise ValueError("need at least 2 classes")
    u = np.zeros(class_count)
    v = np.zeros(class_count)
    u[0] = 1.0
    v[1] = 1.0
    return vector_norm(u - v, norm)
