"""Fits local linear explanations over logit space and derives the importance
matrices used by every downstream metric.

The regression target for a mask z is the centered elementwise log of the
black-box probability vector (pseudo-logits): for a softmax model this equals
the class-centered true logits up to O(eps), so a softmax-linear black box is
recovered exactly in the eps -> 0 limit. The explanation's own probability
output is softmax(coef^T z + bias) everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import softmax, softmax_jacobian
from .errors import SingularSystemError
from .featurize import full_mask
from .sampling import (  # re-exported: kernel surface lives with the fit
    MethodSpec,
    Neighborhood,
    RngStream,
    build_neighborhood,
    lime_kernel,
    materialize,
    shap_kernel,
)

__all__ = [
    "MethodSpec",
    "RngStream",
    "lime_kernel",
    "shap_kernel",
    "pseudo_logits",
    "weighted_ridge_fit",
    "ImportanceMatrices",
    "derive_importance",
    "Explanation",
    "fit_explanation",
]

DEFAULT_PSEUDO_LOGIT_EPS = 1e-6


def pseudo_logits(probs, eps: float = DEFAULT_PSEUDO_LOGIT_EPS) -> np.ndarray:
    """Centered log-probabilities: ln(p + eps) minus its mean over classes.

    softmax(pseudo_logits(p)) recovers p within O(eps) wherever p >> eps, and the
    eps floor keeps zero probabilities finite.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    logs = np.log(np.asarray(probs, dtype=float) + eps)
    return logs - logs.mean(axis=-1, keepdims=True)


def weighted_ridge_fit(masks, targets, weights, alpha: float = 0.0):
    """Solve the weighted ridge regression jointly for every output column.

    Minimizes sum_i w_i * ||t_i - (z_i @ coef + bias)||^2 + alpha * ||coef||_F^2
    with the bias column unpenalized, via least squares on the sqrt-weighted
    design (a sqrt(alpha) block is appended when alpha > 0, which keeps the
    anchor rows of huge weight numerically well-behaved).

    With alpha = 0 a rank-deficient design raises SingularSystemError instead of
    being regularized silently.
    """
    masks = np.asarray(masks, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if masks.ndim != 2:
        raise ValueError("masks must be (n, features)")
    n, feature_count = masks.shape
    if targets.shape[0] != n or weights.shape != (n,):
        raise ValueError("masks, targets and weights must agree on the sample count")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if len(np.unique(masks, axis=0)) < 2:
        raise ValueError("need at least 2 distinct masks to fit")

    design = np.hstack([masks, np.ones((n, 1))])
    scale = np.sqrt(weights)[:, None]
    lhs = design * scale
    rhs = targets * scale
    if alpha > 0:
        ridge = np.sqrt(alpha) * np.eye(feature_count + 1)
        ridge[-1, -1] = 0.0  # bias unpenalized
        lhs = np.vstack([lhs, ridge[:-1]])
        rhs = np.vstack([rhs, np.zeros((feature_count, targets.shape[1]))])

    solution, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if alpha == 0 and rank < feature_count + 1:
        raise SingularSystemError(
            f"design rank {rank} < {feature_count + 1} unknowns with alpha=0; "
            "widen the neighborhood or set alpha > 0"
        )
    return solution[:feature_count], solution[feature_count]


@dataclass
class ImportanceMatrices:
    """The five views of feature importance, all (features, classes).

    logit holds the raw regression coefficients; prob maps them through the
    softmax Jacobian at the instance; combined is the signed geometric mean of
    the two magnitudes carrying the logit sign; relative rescales combined so
    the largest magnitude is exactly 1 (zero matrix stays zero); absolute is
    the entrywise absolute value of relative.
    """

    logit: np.ndarray
    prob: np.ndarray
    combined: np.ndarray
    relative: np.ndarray
    absolute: np.ndarray

    @property
    def feature_count(self) -> int:
        return self.logit.shape[0]

    @property
    def class_count(self) -> int:
        return self.logit.shape[1]

    def to_dict(self) -> dict:
        return {
            "logit": self.logit.tolist(),
            "prob": self.prob.tolist(),
            "combined": self.combined.tolist(),
            "relative": self.relative.tolist(),
            "absolute": self.absolute.tolist(),
        }


def derive_importance(coef, bias, x_mask=None) -> ImportanceMatrices:
    """Build the importance matrices from fitted (coef, bias), evaluated at the
    unperturbed instance (the all-ones mask) unless another mask is given."""
    coef = np.asarray(coef, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(bias))):
        raise ValueError("coefficients must be finite")
    feature_count = coef.shape[0]
    if x_mask is None:
        x_mask = full_mask(feature_count)
    probs_at_x = softmax(np.asarray(x_mask, dtype=float) @ coef + bias)
    jac = softmax_jacobian(probs_at_x)
    prob = coef @ jac
    combined = np.sign(coef) * np.sqrt(np.abs(coef) * np.abs(prob))
    peak = np.abs(combined).max()
    relative = combined / peak if peak > 0 else np.zeros_like(combined)
    return ImportanceMatrices(
        logit=coef,
        prob=prob,
        combined=combined,
        relative=relative,
        absolute=np.abs(relative),
    )


@dataclass
class Explanation:
    """A fitted local linear explanation and its derived importance views."""

    coef: np.ndarray   # (features, classes) over logit space
    bias: np.ndarray   # (classes,)
    method: MethodSpec
    matrices: ImportanceMatrices
    weighted_residual: float
    evaluations: int
    sample_count: int
    neighborhood: "Neighborhood | None" = None  # the fit set; kept for metrics

    @property
    def feature_count(self) -> int:
        return self.coef.shape[0]

    @property
    def class_count(self) -> int:
        return self.coef.shape[1]

    def predict_logits(self, masks) -> np.ndarray:
        return np.asarray(masks, dtype=float) @ self.coef + self.bias

    def predict_probs(self, masks) -> np.ndarray:
        return softmax(self.predict_logits(masks))

    def to_dict(self) -> dict:
        return {
            "method": self.method.label,
            "sigma": self.method.sigma,
            "alpha": self.method.ridge_alpha,
            "sample_count": self.sample_count,
            "evaluations": self.evaluations,
            "weighted_residual": self.weighted_residual,
            "coef": self.coef.tolist(),
            "bias": self.bias.tolist(),
            "matrices": self.matrices.to_dict(),
        }


def fit_explanation(blackbox, x, featurizer, method: MethodSpec, sample_count: int,
                    rng, eps: float = DEFAULT_PSEUDO_LOGIT_EPS) -> Explanation:
    """Sample a neighborhood, reconstruct pseudo-logit targets, and fit.

    Two calls with the same (seed, stream) and configuration return bit-identical
    explanations; all randomness flows through `rng`.
    """
    rng = materialize(rng)
    before = blackbox.eval_counter
    neighborhood = build_neighborhood(method, sample_count, blackbox, featurizer, x, rng)
    targets = pseudo_logits(neighborhood.outputs, eps)
    coef, bias = weighted_ridge_fit(
        neighborhood.masks, targets, neighborhood.weights, alpha=method.ridge_alpha
    )
    predictions = np.asarray(neighborhood.masks, dtype=float) @ coef + bias
    residual = float(neighborhood.weights @ ((targets - predictions) ** 2).sum(axis=1))
    return Explanation(
        coef=coef,
        bias=bias,
        method=method,
        matrices=derive_importance(coef, bias),
        weighted_residual=residual,
        evaluations=blackbox.eval_counter - before,
        sample_count=len(neighborhood),
        neighborhood=neighborhood,
    )
