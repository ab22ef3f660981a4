import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revel.core import (
    as_probabilities,
    norm_constant,
    prob_distance,
    softmax,
    softmax_jacobian,
)

NORMS = ("one", "two", "infinity")


def prob_vectors(max_classes=8):
    return st.lists(
        st.floats(0.01, 100.0, allow_nan=False), min_size=2, max_size=max_classes
    ).map(lambda v: np.asarray(v) / np.sum(v))


def logit_vectors(max_classes=8, bound=30.0):
    return st.lists(
        st.floats(-bound, bound, allow_nan=False), min_size=2, max_size=max_classes
    ).map(np.asarray)


class TestSoftmax:
    def test_worked_example(self):
        # the self-consistent three-class example: (71.52%, 26.31%, 2.15%)
        out = softmax([2.5, 1.5, -1.0])
        assert np.abs(out - [0.7152, 0.2631, 0.0215]).max() < 5e-4

    def test_two_class_symmetry(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_direct_evaluation(self):
        # oracle: longhand exp ratios
        exps = [math.exp(v) for v in (5.0, 2.0, -2.0)]
        expected = np.asarray(exps) / sum(exps)
        out = softmax([5.0, 2.0, -2.0])
        assert np.abs(out - expected).max() < 1e-12
        assert np.abs(out - [0.9517, 0.0474, 0.0009]).max() < 5e-4

    def test_no_overflow_at_large_logits(self):
        out = softmax([700.0, -700.0, 0.0])
        assert np.all(np.isfinite(out))
        assert out[0] > 0.999999

    @given(logit_vectors())
    def test_sums_to_one(self, logits):
        assert abs(softmax(logits).sum() - 1.0) < 1e-9

    @given(logit_vectors(), st.floats(-100, 100, allow_nan=False))
    def test_shift_invariance(self, logits, shift):
        assert np.abs(softmax(logits + shift) - softmax(logits)).max() < 1e-9

    def test_batched_rows(self):
        batch = softmax(np.array([[0.0, 0.0], [2.5, 1.5]]))
        assert batch.shape == (2, 2)
        assert np.allclose(batch.sum(axis=1), 1.0)


class TestSoftmaxJacobian:
    def test_two_class(self):
        jac = softmax_jacobian([0.5, 0.5])
        assert np.allclose(jac, [[0.25, -0.25], [-0.25, 0.25]])

    def test_saturated(self):
        assert np.allclose(softmax_jacobian([1.0, 0.0]), 0.0)

    def test_worked_example_diagonal(self):
        # rounded published probabilities: diagonal matches to 1e-3, rows sum to
        # zero only as tightly as the rounding allows
        jac = softmax_jacobian([0.7152, 0.2631, 0.0215])
        assert np.abs(np.diag(jac) - [0.2037, 0.1939, 0.0211]).max() < 1e-3
        assert np.abs(jac.sum(axis=1)).max() < 1e-3
        exact = softmax_jacobian(softmax([2.5, 1.5, -1.0]))
        assert np.abs(exact.sum(axis=1)).max() < 1e-12

    @given(prob_vectors())
    def test_rows_sum_to_zero_and_symmetric(self, probs):
        jac = softmax_jacobian(probs)
        assert np.abs(jac.sum(axis=1)).max() < 1e-12
        assert np.array_equal(jac, jac.T)

    @settings(max_examples=50)
    @given(logit_vectors(bound=5.0))
    def test_matches_central_finite_differences(self, logits):
        # oracle: central differences of softmax, step 1e-4
        step = 1e-4
        jac = softmax_jacobian(softmax(logits))
        for i in range(len(logits)):
            bump = np.zeros(len(logits))
            bump[i] = step
            numeric = (softmax(logits + bump) - softmax(logits - bump)) / (2 * step)
            assert np.abs(jac[i] - numeric).max() < 1e-5


class TestProbDistance:
    def test_zero_iff_equal(self):
        u = np.array([0.3, 0.7])
        assert prob_distance(u, u) == 0.0

    def test_one_hot_pair_two_norm(self):
        assert abs(prob_distance([1, 0], [0, 1], "two") - math.sqrt(2)) < 1e-5

    def test_direct_two_norm(self):
        assert abs(prob_distance([0.8, 0.2], [0.6, 0.4], "two") - math.sqrt(0.08)) < 1e-5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prob_distance([0.5, 0.5], [0.2, 0.3, 0.5])

    @given(prob_vectors(max_classes=5), st.sampled_from(NORMS))
    def test_symmetry(self, probs, norm):
        rolled = np.roll(probs, 1)
        assert prob_distance(probs, rolled, norm) == prob_distance(rolled, probs, norm)

    @settings(max_examples=200)
    @given(st.integers(2, 6), st.integers(0, 2 ** 31), st.sampled_from(NORMS))
    def test_triangle_inequality(self, classes, seed, norm):
        gen = np.random.default_rng(seed)
        u, v, w = (gen.dirichlet(np.ones(classes)) for _ in range(3))
        assert prob_distance(u, w, norm) <= prob_distance(u, v, norm) + prob_distance(v, w, norm) + 1e-12

    @settings(max_examples=200)
    @given(st.integers(2, 8), st.integers(0, 2 ** 31), st.sampled_from(NORMS))
    def test_bounded_by_norm_constant(self, classes, seed, norm):
        gen = np.random.default_rng(seed)
        u = gen.dirichlet(np.ones(classes))
        v = gen.dirichlet(np.ones(classes))
        assert prob_distance(u, v, norm) <= norm_constant(norm, classes) + 1e-12


class TestNormConstant:
    @pytest.mark.parametrize("classes", [2, 3, 10, 100])
    def test_two_norm(self, classes):
        assert abs(norm_constant("two", classes) - math.sqrt(2)) < 1e-9

    @pytest.mark.parametrize("classes", [2, 5, 41])
    def test_one_and_infinity(self, classes):
        assert norm_constant("one", classes) == 2.0
        assert norm_constant("infinity", classes) == 1.0

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            norm_constant("two", 1)

    def test_rejects_unknown_norm(self):
        with pytest.raises(ValueError):
            norm_constant("three", 3)


class TestValidation:
    def test_accepts_softmax_output(self):
        as_probabilities(softmax([1.0, 2.0, 3.0]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            as_probabilities([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            as_probabilities([-0.1, 1.1])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            as_probabilities([np.nan, 1.0])
