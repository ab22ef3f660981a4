import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revel.blackbox import make_synthetic_suite
from revel.featurize import VectorFeaturizer
from revel.sampling import (
    MethodSpec,
    RngStream,
    build_neighborhood,
    clamp_exclusion_count,
    draw_masks,
    enumerate_masks,
    lime_exclusion_count,
    sample_mask,
    shap_exclusion_distribution,
    shap_local_exclusion_distribution,
)


class TestRngStream:
    def test_same_stream_same_draws(self):
        a = RngStream(123).child(4, 5).generator().uniform(size=10)
        b = RngStream(123).child(4, 5).generator().uniform(size=10)
        assert np.array_equal(a, b)

    def test_different_children_differ(self):
        a = RngStream(123).child(4, 5).generator().uniform(size=10)
        b = RngStream(123).child(4, 6).generator().uniform(size=10)
        assert not np.array_equal(a, b)

    def test_label(self):
        assert RngStream(9).child(1, 2).label() == "9/1/2"


class TestMethodSpec:
    def test_lime_requires_sigma(self):
        with pytest.raises(ValueError):
            MethodSpec("lime")

    def test_exact_alias(self):
        assert MethodSpec("exact").kind == "shap-exact"

    def test_alpha_defaults(self):
        assert MethodSpec("lime", sigma=2.0).ridge_alpha == 1.0
        assert MethodSpec("shap-global").ridge_alpha == 1.0
        assert MethodSpec("shap-exact").ridge_alpha == 0.0
        assert MethodSpec("shap-exact", alpha=0.5).ridge_alpha == 0.5

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            MethodSpec("gradients")


class TestLimeExclusionCount:
    def test_floor(self):
        assert clamp_exclusion_count(3.7, 8) == 3

    def test_clamped_to_feature_count(self):
        assert clamp_exclusion_count(12.4, 8) == 8

    def test_single_draw_in_range(self):
        gen = RngStream(0).generator()
        for _ in range(100):
            v = lime_exclusion_count(2.0, 8, gen)
            assert 0 <= v <= 8

    def test_empirical_mean(self):
        # floor(Exp(rate 1/2)) has mean e^{-1/2} / (1 - e^{-1/2}) ~ 1.5415
        draws = lime_exclusion_count(2.0, 64, RngStream(1).generator(), size=30000)
        assert 1.4 <= draws.mean() <= 1.6

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            lime_exclusion_count(0.0, 8, RngStream(0).generator())


class TestShapExclusionDistribution:
    def test_f2_table(self):
        table = shap_exclusion_distribution(2)
        assert np.abs(table - [4 / 11, 3 / 11, 4 / 11]).max() < 1e-12

    @given(st.integers(2, 256))
    def test_normalized_and_symmetric(self, feature_count):
        table = shap_exclusion_distribution(feature_count)
        assert abs(table.sum() - 1.0) < 1e-12
        assert np.abs(table - table[::-1]).max() < 1e-15

    def test_f4_symmetry_pairs(self):
        table = shap_exclusion_distribution(4)
        assert table[0] == table[4] and table[1] == table[3]

    def test_local_truncation(self):
        table = shap_local_exclusion_distribution(5)
        assert np.all(table[4:] == 0.0)  # ceil(5/2) = 3 is the last allowed count
        assert abs(table.sum() - 1.0) < 1e-12
        full = shap_exclusion_distribution(5)
        assert np.allclose(table[:4], full[:4] / full[:4].sum())


class TestSampleMask:
    def test_zero_exclusions(self):
        assert np.all(sample_mask(0, 6, RngStream(0).generator()) == 1)

    def test_all_exclusions(self):
        assert np.all(sample_mask(6, 6, RngStream(0).generator()) == 0)

    def test_exact_exclusion_count(self):
        gen = RngStream(2).generator()
        for v in range(5):
            assert sample_mask(v, 4, gen).sum() == 4 - v

    def test_uniform_choice(self):
        gen = RngStream(3).generator()
        counts = np.zeros(4)
        draws = 40000
        for _ in range(draws):
            counts += sample_mask(1, 4, gen) == 0
        assert np.abs(counts / draws - 0.25).max() < 0.02

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            sample_mask(5, 4, RngStream(0).generator())


class TestEnumerateMasks:
    def test_f2_order(self):
        masks = enumerate_masks(2)
        assert masks.tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]

    def test_f10_complete(self):
        masks = enumerate_masks(10)
        assert masks.shape == (1024, 10)
        assert len(np.unique(masks, axis=0)) == 1024

    def test_guard(self):
        with pytest.raises(ValueError):
            enumerate_masks(21)


class TestBuildNeighborhood:
    def setup_method(self):
        self.handle = make_synthetic_suite(0, 8, 3)[0]
        self.featurizer = VectorFeaturizer(8)
        self.x = np.ones(8)

    def test_origin_included_once(self):
        nbh = build_neighborhood(
            MethodSpec("lime", sigma=2.0), 100, self.handle.scoped(), self.featurizer,
            self.x, RngStream(0).generator(),
        )
        assert len(nbh) == 101
        assert nbh.origin_included
        assert np.all(nbh.masks[0] == 1)
        assert np.array_equal(nbh.origin_output(), nbh.outputs[0])

    def test_exact_enumerates_everything(self):
        scoped = self.handle.scoped()
        nbh = build_neighborhood(
            MethodSpec("shap-exact"), 0, scoped, self.featurizer, self.x,
            RngStream(0).generator(),
        )
        assert len(nbh) == 256
        assert scoped.eval_counter == 256
        assert not nbh.origin_included
        assert np.array_equal(nbh.origin_output(), nbh.outputs[-1])

    def test_shap_local_stays_near_instance(self):
        handle = make_synthetic_suite(0, 64, 3)[0]
        nbh = build_neighborhood(
            MethodSpec("shap-local"), 200, handle.scoped(), VectorFeaturizer(64),
            np.ones(64), RngStream(5).generator(),
        )
        excluded = 64 - nbh.masks[1:].sum(axis=1)
        assert excluded.max() <= 32

    def test_reproducible_bit_for_bit(self):
        spec = MethodSpec("shap-global")
        first = build_neighborhood(spec, 50, self.handle.scoped(), self.featurizer,
                                   self.x, RngStream(7).child(1).generator())
        second = build_neighborhood(spec, 50, self.handle.scoped(), self.featurizer,
                                    self.x, RngStream(7).child(1).generator())
        assert np.array_equal(first.masks, second.masks)
        assert np.array_equal(first.outputs, second.outputs)
        assert np.array_equal(first.weights, second.weights)

    def test_weights_nonnegative_one_positive(self):
        nbh = build_neighborhood(
            MethodSpec("lime", sigma=0.5), 40, self.handle.scoped(), self.featurizer,
            self.x, RngStream(11).generator(),
        )
        assert nbh.weights.min() >= 0.0
        assert nbh.weights.max() > 0.0


class TestEmpiricalLaws:
    @settings(deadline=None)
    @given(st.sampled_from([0, 1, 2]))
    def test_lime_histogram_matches_analytic(self, seed):
        sigma, feature_count, draws = 2.0, 16, 30000
        counts = lime_exclusion_count(sigma, feature_count, RngStream(seed).generator(), size=draws)
        histogram = np.bincount(counts, minlength=feature_count + 1) / draws
        decay = np.exp(-1.0 / sigma)
        analytic = np.array([
            decay ** k * (1 - decay) if k < feature_count else decay ** feature_count
            for k in range(feature_count + 1)
        ])
        assert np.abs(histogram - analytic).max() < 0.015

    def test_shap_histogram_matches_table(self):
        feature_count, draws = 8, 30000
        table = shap_exclusion_distribution(feature_count)
        gen = RngStream(4).generator()
        sampled = gen.choice(feature_count + 1, size=draws, p=table)
        histogram = np.bincount(sampled, minlength=feature_count + 1) / draws
        assert np.abs(histogram - table).max() < 0.015

    def test_draw_masks_lime_duplicates_allowed(self):
        masks = draw_masks(MethodSpec("lime", sigma=8.0), 300, 3, RngStream(6).generator())
        assert masks.shape == (300, 3)
        assert len(np.unique(masks, axis=0)) < 300  # replacement keeps duplicates
