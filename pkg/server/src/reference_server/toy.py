"""Built-in toy classifier: a fixed-weight softmax-linear map over mean-pooled
image patches. Deterministic, framework-free, and cheap enough for protocol
conformance testing."""

from __future__ import annotations

import numpy as np

TOY_PARAMETER_SEED = 414243


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def toy_parameters(side: int, class_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (weights, bias) for a side*side patch grid; same numbers every call."""
    rng = np.random.default_rng([TOY_PARAMETER_SEED, side, class_count])
    weights = rng.normal(0.0, 2.0, (side * side, class_count))
    bias = rng.normal(0.0, 0.5, class_count)
    return weights, bias


def make_toy_model(height: int, width: int, channels: int, side: int, class_count: int):
    """Batch predictor (n, height, width, channels) -> (n, class_count) probabilities."""
    if height % side or width % side:
        raise ValueError(f"side {side} does not divide {height}x{width}")
    weights, bias = toy_parameters(side, class_count)
    patch_h = height // side
    patch_w = width // side

    def predict(images) -> np.ndarray:
        arr = np.asarray(images, dtype=float)
        if arr.ndim == 3:
            arr = arr[None, ...]
        if arr.shape[1:] != (height, width, channels):
            raise ValueError(f"expected inputs shaped (n, {height}, {width}, {channels}), got {arr.shape}")
        patches = arr.reshape(len(arr), side, patch_h, side, patch_w, channels)
        pooled = patches.mean(axis=(2, 4, 5))  # (n, side, side)
        return _softmax(pooled.reshape(len(arr), side * side) @ weights + bias)

    return predict
