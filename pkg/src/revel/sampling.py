"""Neighborhood generation around an instance.

Masks are drawn by each method's exclusion-count law (exponential for LIME, the
coalition-weight discrete law for SHAP), features to exclude are picked uniformly,
and the regression weight of every drawn mask comes from the method's kernel.
Sampling is with replacement; duplicates are kept so the kernel weighting stays
unbiased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .featurize import full_mask, mask_key

MAX_ENUMERATION_FEATURES = 20
SINGULAR_COALITION_WEIGHT = 1e6  # near-enforces the empty/full coalition anchors

METHOD_KINDS = ("lime", "shap-global", "shap-local", "shap-exact")


@dataclass(frozen=True)
class RngStream:
    """Named spot in the reproducible randomness tree.

    Identical (seed, stream) always materialize the identical generator, across
    platforms and regardless of scheduling, so every explanation task can own a
    private stream derived from its position in the run.
    """

    seed: int
    stream: tuple[int, ...] = ()
    algorithm: str = field(default="pcg64", init=False, repr=False, compare=False)

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, *self.stream])

    def label(self) -> str:
        return "/".join(str(i) for i in (self.seed, *self.stream))


def materialize(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass(frozen=True)
class MethodSpec:
    """Explanation method tag plus its kernel hyper-parameters.

    alpha=None defers to the method default: 1.0 for sampled fits, 0.0 for the
    exhaustive SHAP path where the anchor weights must dominate unshrunk.
    """

    kind: str
    sigma: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        kind = {"exact": "shap-exact"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in METHOD_KINDS:
            raise ValueError(f"unknown method kind {self.kind!r}; expected one of {METHOD_KINDS}")
        if kind == "lime":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("lime requires sigma > 0")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("ridge alpha must be >= 0")

    @property
    def ridge_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return 0.0 if self.kind == "shap-exact" else 1.0

    @property
    def label(self) -> str:
        if self.kind == "lime":
            return f"lime(sigma={self.sigma:g})"
        return self.kind


def lime_kernel(distance: float, sigma: float) -> float:
    """exp(-d^2 / sigma^2); 1 exactly at the instance itself."""
    if distance < 0:
        raise ValueError("distance must be >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return float(math.exp(-(distance ** 2) / sigma ** 2))


def shap_kernel(feature_count: int, present_count: int,
                big_weight: float = SINGULAR_COALITION_WEIGHT) -> float:
    """Coalition weight (F-1) / (C(F,|z|) (F-|z|) |z|).

    The empty and full coalitions get the large finite surrogate `big_weight`
    instead of the undefined combinatorial value.
    """
    if not 0 <= present_count <= feature_count:
        raise ValueError(f"present_count {present_count} out of range 0..{feature_count}")
    if present_count in (0, feature_count):
        return big_weight
    denom = math.comb(feature_count, present_count) * (feature_count - present_count) * present_count
    return (feature_count - 1) / denom


def mask_distance(mask) -> float:
    """Euclidean distance in mask space from the all-ones mask: sqrt(#excluded)."""
    mask = np.asarray(mask)
    return float(np.sqrt(float((mask == 0).sum())))


def clamp_exclusion_count(raw: float, feature_count: int) -> int:
    """Floor the raw draw; values past the feature count clamp to it."""
    return min(int(math.floor(raw)), feature_count)


def lime_exclusion_count(sigma: float, feature_count: int, rng, size: int | None = None):
    """Number of features to exclude: floor of Exp(rate 1/sigma), clamped to F."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if feature_count < 2:
        raise ValueError("need at least 2 features")
    rng = materialize(rng)
    raw = rng.exponential(scale=sigma, size=size)
    if size is None:
        return clamp_exclusion_count(float(raw), feature_count)
    return np.minimum(np.floor(raw).astype(int), feature_count)


def shap_exclusion_distribution(feature_count: int) -> np.ndarray:
    """P[v=i] proportional to 1/((i+1)(F-i+1)) over i = 0..F; symmetric about F/2."""
    if feature_count < 2:
        raise ValueError("need at least 2 features")
    i = np.arange(feature_count + 1, dtype=float)
    weights = 1.0 / ((i + 1.0) * (feature_count - i + 1.0))
    return weights / weights.sum()


def shap_local_exclusion_distribution(feature_count: int) -> np.ndarray:
    """Exclusion law truncated to v <= ceil(F/2) and renormalized.

    This is the 'local' reading: neighbors stay near the instance instead of
    ranging down to almost-empty masks.
    """
    table = shap_exclusion_distribution(feature_count)
    cutoff = math.ceil(feature_count / 2)
    truncated = np.zeros_like(table)
    truncated[: cutoff + 1] = table[: cutoff + 1]
    return truncated / truncated.sum()


def sample_mask(excluded_count: int, feature_count: int, rng) -> np.ndarray:
    """Mask with exactly `excluded_count` zeros, drawn uniformly without replacement."""
    if not 0 <= excluded_count <= feature_count:
        raise ValueError(f"excluded_count {excluded_count} out of range 0..{feature_count}")
    rng = materialize(rng)
    mask = full_mask(feature_count)
    if excluded_count:
        out = rng.choice(feature_count, size=excluded_count, replace=False)
        mask[out] = 0
    return mask


def enumerate_masks(feature_count: int) -> np.ndarray:
    """All 2^F masks in increasing binary-integer order (bit 0 least significant)."""
    if feature_count > MAX_ENUMERATION_FEATURES:
        raise ValueError(f"refusing to enumerate 2^{feature_count} masks (limit 2^{MAX_ENUMERATION_FEATURES})")
    if feature_count < 2:
        raise ValueError("need at least 2 features")
    codes = np.arange(2 ** feature_count, dtype=np.int64)
    return ((codes[:, None] >> np.arange(feature_count)[None, :]) & 1).astype(np.uint8)


@dataclass
class Neighborhood:
    """Masks around an instance with their black-box outputs and kernel weights."""

    masks: np.ndarray      # (n, F) uint8
    outputs: np.ndarray    # (n, C) probabilities
    weights: np.ndarray    # (n,) nonnegative kernel weights
    origin_included: bool  # when True, masks[0] is the all-ones mask

    def __post_init__(self):
        if not (len(self.masks) == len(self.outputs) == len(self.weights)):
            raise ValueError("masks, outputs and weights must have equal lengths")
        if not np.all(np.isfinite(self.weights)) or self.weights.min() < 0:
            raise ValueError("weights must be finite and nonnegative")
        if self.origin_included and not bool(np.all(self.masks[0] == 1)):
            raise ValueError("origin_included requires masks[0] to be the all-ones mask")

    def __len__(self) -> int:
        return len(self.masks)

    def origin_output(self) -> np.ndarray:
        """Black-box output at the unperturbed instance."""
        if self.origin_included:
            return self.outputs[0]
        idx = np.nonzero((self.masks == 1).all(axis=1))[0]
        if len(idx) == 0:
            raise ValueError("neighborhood does not contain the all-ones mask")
        return self.outputs[int(idx[0])]


def method_weights(method: MethodSpec, masks: np.ndarray) -> np.ndarray:
    feature_count = masks.shape[1]
    if method.kind == "lime":
        excluded = feature_count - masks.sum(axis=1)
        return np.exp(-excluded.astype(float) / method.sigma ** 2)
    present = masks.sum(axis=1)
    return np.array([shap_kernel(feature_count, int(k)) for k in present])


def draw_masks(method: MethodSpec, count: int, feature_count: int, rng) -> np.ndarray:
    """Sample `count` masks by the method's exclusion law (with replacement)."""
    rng = materialize(rng)
    if method.kind == "lime":
        excluded = lime_exclusion_count(method.sigma, feature_count, rng, size=count)
    elif method.kind == "shap-global":
        table = shap_exclusion_distribution(feature_count)
        excluded = rng.choice(feature_count + 1, size=count, p=table)
    elif method.kind == "shap-local":
        table = shap_local_exclusion_distribution(feature_count)
        excluded = rng.choice(feature_count + 1, size=count, p=table)
    else:
        raise ValueError(f"{method.kind} does not sample masks")
    return np.stack([sample_mask(int(v), feature_count, rng) for v in excluded])


def build_neighborhood(method: MethodSpec, sample_count: int, blackbox, featurizer,
                       x, rng) -> Neighborhood:
    """Draw the neighborhood, evaluate the black box on every masked input, and
    attach kernel weights.

    Sampled methods include the unperturbed instance once at position 0, costing
    sample_count + 1 evaluations before caching; shap-exact evaluates all 2^F
    enumerated masks and ignores sample_count.
    """
    feature_count = featurizer.feature_count
    rng = materialize(rng)
    if method.kind == "shap-exact":
        masks = enumerate_masks(feature_count)
        origin_included = False
    else:
        if sample_count < 1:
            raise ValueError("need at least one sampled neighbor")
        sampled = draw_masks(method, sample_count, feature_count, rng)
        masks = np.vstack([full_mask(feature_count)[None, :], sampled])
        origin_included = True

    inputs = np.stack([featurizer.mask_to_input(x, m) for m in masks])
    outputs = blackbox.evaluate_batch(inputs, keys=[mask_key(m) for m in masks])
    weights = method_weights(method, masks)
    return Neighborhood(masks=masks, outputs=outputs, weights=weights, origin_included=origin_included)
