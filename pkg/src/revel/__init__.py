"""Local linear explanations for black-box classifiers, quality metrics for the
explanations, and a reproducible experiment harness."""

__version__ = "0.1.0"

from .explain import MethodSpec, RngStream, fit_explanation  # noqa: F401
from .blackbox import BlackBoxHandle, EvalBudget, make_synthetic_suite  # noqa: F401
