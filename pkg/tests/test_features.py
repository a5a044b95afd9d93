import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classview.features import (
    RandomFeatureMap,
    Vocabulary,
    gaussian_kernel,
    rff_project,
    tf_features,
    tfidf_features,
    tfidf_stats,
    tfidf_stats_inc,
    tokenize,
)
from classview.vectors import dot, norm


def test_tokenize_lowercases_and_splits_on_non_alnum():
    assert tokenize("Foo-bar, baz42!  qux") == ["foo", "bar", "baz42", "qux"]
    assert tokenize("") == []


class TestTermFrequency:
    def test_counts_normalized_by_length(self):
        vocab = Vocabulary()
        v = tf_features(vocab, "a b a")
        assert vocab.index == {"a": 0, "b": 1}
        assert v.entries == [(0, 2 / 3), (1, 1 / 3)]

    def test_empty_document_is_zero_vector(self):
        assert tf_features(Vocabulary(), "").entries == []

    def test_single_token_normalizes_to_one(self):
        v = tf_features(Vocabulary(), "x x x x")
        assert v.entries == [(0, 1.0)]

    def test_nonempty_documents_have_unit_l1_norm(self):
        vocab = Vocabulary()
        for text in ("a b c", "a a", "d e f g d"):
            assert norm(tf_features(vocab, text), 1) == pytest.approx(1.0, rel=1e-12)

    def test_read_path_skips_unknown_tokens(self):
        vocab = Vocabulary()
        tf_features(vocab, "a b")
        v = tf_features(vocab, "a z", grow=False)
        assert v.entries == [(0, 0.5)]
        assert "z" not in vocab.index


class TestTfIdf:
    def test_stats_hand_count(self):
        vocab = tfidf_stats(["a b", "a"])
        assert vocab.document_count == 2
        assert vocab.doc_frequency[vocab.index["a"]] == 2
        assert vocab.doc_frequency[vocab.index["b"]] == 1

    def test_stats_inc_hand_count(self):
        vocab = tfidf_stats(["a b", "a"])
        vocab2 = tfidf_stats_inc(vocab, "b c")
        assert vocab2.document_count == 3
        assert vocab2.doc_frequency[vocab2.index["b"]] == 2
        assert vocab2.doc_frequency[vocab2.index["c"]] == 1
        # the input snapshot is untouched
        assert vocab.document_count == 2

    def test_ubiquitous_token_drops_out(self):
        vocab = tfidf_stats(["a b", "a c"])
        v = tfidf_features(vocab, "a b")
        idx_a = vocab.index["a"]
        assert all(i != idx_a for i, _ in v.entries)
        idx_b = vocab.index["b"]
        expected_b = 0.5 * math.log((1 + 2) / (1 + 1))
        assert dict(v.entries)[idx_b] == pytest.approx(expected_b, rel=1e-12)

    def test_requires_statistics(self):
        with pytest.raises(ValueError):
            tfidf_features(Vocabulary(), "a")

    def test_unknown_token_omitted(self):
        vocab = tfidf_stats(["a"])
        assert tfidf_features(vocab, "z").entries == []

    @given(st.lists(st.lists(st.sampled_from("abcdef"), max_size=6), min_size=1, max_size=12))
    @settings(max_examples=150, deadline=None)
    def test_incremental_equals_batch(self, docs):
        batch = tfidf_stats(docs)
        rolling = Vocabulary()
        for doc in docs:
            rolling = tfidf_stats_inc(rolling, doc)
        assert rolling.index == batch.index
        assert rolling.document_count == batch.document_count
        assert rolling.doc_frequency == batch.doc_frequency


class TestRandomFeatures:
    def test_deterministic_given_seed(self):
        a = RandomFeatureMap.sample(5, 64, seed=9)
        b = RandomFeatureMap.sample(5, 64, seed=9)
        assert np.array_equal(a.directions, b.directions)
        x = np.array([0.1, 0.2, 0.0, -0.3, 0.05])
        assert np.array_equal(rff_project(a, x), rff_project(b, x))

    def test_zero_input_with_zero_phase_directions(self):
        fmap = RandomFeatureMap.sample(3, 16, seed=1)
        dirs = fmap.directions.copy()
        dirs[:, -1] = 0.0  # kill the phase slot
        fmap = RandomFeatureMap(directions=dirs, kernel="gaussian", bandwidth=0.5)
        z = rff_project(fmap, np.zeros(3))
        assert np.allclose(z, math.sqrt(2.0 / 16.0))

    def test_self_kernel_near_one(self):
        fmap = RandomFeatureMap.sample(5, 2048, seed=3)
        rng = np.random.default_rng(4)
        x = rng.normal(size=5)
        x /= 2.0 * np.linalg.norm(x)
        z = rff_project(fmap, x)
        assert abs(dot(z, z) - 1.0) <= 0.15

    def test_kernel_approximation_sample(self):
        # small preview of the acceptance-scale check
        bandwidth = 0.5
        fmap = RandomFeatureMap.sample(5, 2048, kernel="gaussian", bandwidth=bandwidth, seed=7)
        rng = np.random.default_rng(8)
        ok = 0
        trials = 100
        for _ in range(trials):
            x, y = rng.normal(size=5), rng.normal(size=5)
            x /= max(1.0, np.linalg.norm(x)) * 1.1
            y /= max(1.0, np.linalg.norm(y)) * 1.1
            approx = dot(rff_project(fmap, x), rff_project(fmap, y))
            if abs(approx - gaussian_kernel(x, y, bandwidth)) <= 0.1:
                ok += 1
        assert ok >= 95

    def test_rejects_point_outside_unit_ball(self):
        fmap = RandomFeatureMap.sample(2, 8)
        with pytest.raises(ValueError):
            rff_project(fmap, np.array([1.0, 1.0]))

    def test_sphere_mode_rows_unit_length(self):
        fmap = RandomFeatureMap.sample(4, 32, mode="sphere", seed=5)
        assert np.allclose(np.linalg.norm(fmap.directions, axis=1), 1.0)

    def test_shorter_input_is_padded(self):
        fmap = RandomFeatureMap.sample(6, 16, seed=11)
        narrow = rff_project(fmap, np.array([0.3, -0.2]))
        wide = rff_project(fmap, np.array([0.3, -0.2, 0.0, 0.0, 0.0, 0.0]))
        assert np.array_equal(narrow, wide)
