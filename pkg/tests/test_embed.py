import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from semtrack.embed import (AveragedWordEmbedder, EmbedderConfig, OOVPolicy, OutOfVocabularyError,
                            PrecomputedEmbedder, cosine_matrix, cosine_similarity, embed_averaged,
                            embed_precomputed, make_embedder, tokenize)
from semtrack.ingest import SentenceVectorSidecar, WordVectorTable


def table(**vectors):
    return WordVectorTable(len(next(iter(vectors.values()))),
                           {k: np.asarray(v, dtype=float) for k, v in vectors.items()})


@pytest.mark.parametrize("sentence, expected", [
    ("A man riding a horse.", ["a", "man", "riding", "a", "horse"]),
    ("", []),
    ("the  BIRD,  flying", ["the", "bird", "flying"]),
    ("'quoted' -- (paren)", ["quoted", "paren"]),
    ("don't stop", ["don't", "stop"]),
])
def test_tokenize(sentence, expected):
    assert tokenize(sentence) == expected


class TestAveraged:
    def test_two_term_mean(self):
        np.testing.assert_array_equal(embed_averaged("a b", table(a=[1, 0], b=[0, 1])), [0.5, 0.5])

    def test_repeated_token(self):
        np.testing.assert_array_equal(embed_averaged("a a a", table(a=[1, 0])), [1, 0])

    def test_all_oov(self):
        assert embed_averaged("zzz qqq", table(a=[1, 0]), EmbedderConfig()) is None

    def test_oov_skipped(self):
        np.testing.assert_array_equal(embed_averaged("a zzz", table(a=[1, 0])), [1, 0])

    def test_oov_fail_names_token(self):
        cfg = EmbedderConfig(oov_policy="fail")
        with pytest.raises(OutOfVocabularyError, match="'zzz'"):
            embed_averaged("a zzz", table(a=[1, 0]), cfg)

    def test_case_and_punctuation(self):
        np.testing.assert_array_equal(embed_averaged("A, B!", table(a=[1, 0], b=[0, 1])),
                                      [0.5, 0.5])

    def test_empty_table(self):
        with pytest.raises(ValueError):
            embed_averaged("a", WordVectorTable(2, {}))

    @given(st.lists(st.sampled_from(["a", "b", "c", "zz"]), min_size=1, max_size=8),
           st.randoms(use_true_random=False))
    def test_permutation_invariant(self, tokens, rnd):
        t = table(a=[1.0, 0.25, -3.0], b=[0.1, 0.2, 0.3], c=[-7.5, 1e-3, 2.0])
        shuffled = tokens[:]
        rnd.shuffle(shuffled)
        v1 = embed_averaged(" ".join(tokens), t)
        v2 = embed_averaged(" ".join(shuffled), t)
        if v1 is None:
            assert v2 is None
        else:
            np.testing.assert_allclose(v1, v2, rtol=0, atol=1e-12)

    def test_embedder_memoizes(self):
        emb = AveragedWordEmbedder(table(a=[1, 0]))
        assert emb.embed("a") is emb.embed("a")
        assert emb.dim == 2


class TestPrecomputed:
    side = SentenceVectorSidecar(2, {"a dog": np.array([1.0, 2.0])})

    def test_lookup(self):
        np.testing.assert_array_equal(embed_precomputed("a dog", self.side), [1, 2])

    def test_normalized_lookup(self):
        np.testing.assert_array_equal(embed_precomputed("a  dog ", self.side), [1, 2])

    def test_absent(self):
        assert embed_precomputed("a cat", self.side) is None

    def test_make_embedder(self):
        emb = make_embedder(EmbedderConfig("precomputed_sentence"), sidecar=self.side)
        assert isinstance(emb, PrecomputedEmbedder)
        with pytest.raises(ValueError):
            make_embedder(EmbedderConfig("averaged_words"))

    def test_bad_backend(self):
        with pytest.raises(ValueError):
            EmbedderConfig("skipthought")


def _oracle_cosine(a, b):
    # independent route: math.fsum dot products
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return max(-1.0, min(1.0, dot / (na * nb)))


class TestCosine:
    @pytest.mark.parametrize("a, b, expected", [
        ([1, 0], [1, 0], 1.0),
        ([1, 0], [0, 1], 0.0),
        ([1, 0], [-1, 0], -1.0),
        ([0, 0], [1, 0], 0.0),
    ])
    def test_examples(self, a, b, expected):
        assert cosine_similarity(a, b) == expected

    def test_diagonal(self):
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-4)
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(_oracle_cosine([1, 1], [1, 0]),
                                                                  abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cosine_similarity([1, 0], [1, 0, 0])

    vectors = hnp.arrays(np.float64, 5, elements=st.floats(-1e3, 1e3, allow_nan=False))

    @given(vectors, vectors)
    def test_matches_oracle(self, a, b):
        assert cosine_similarity(a, b) == pytest.approx(_oracle_cosine(a, b), abs=1e-9)

    @given(vectors, vectors)
    def test_symmetric(self, a, b):
        assert cosine_similarity(a, b) == cosine_similarity(b, a)

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        rows, cols = rng.normal(size=(6, 7)), rng.normal(size=(4, 7))
        rows[2] = 0.0
        mat = cosine_matrix(rows, cols)
        for i in range(6):
            for j in range(4):
                assert mat[i, j] == pytest.approx(cosine_similarity(rows[i], cols[j]), abs=1e-12)
        assert np.all(mat[2] == 0.0)
