import math

import numpy as np
import pytest

from counterfactual_refiner.discriminator import (
    TokenizerConfig, TrainConfig, tokenize, fit_vectorizer, vectorize, WORD
)
from counterfactual_refiner.structures import ValidationError, TrainingError

WORDS = TokenizerConfig(mode=WORD)


def test_word_tokens_strip_punctuation():
    assert tokenize("Hello, world! (really)", WORDS) == \
        ["hello", "world", "really"]
    assert tokenize("-- ...", WORDS) == []


def test_char_ngrams_shorter_first():
    config = TokenizerConfig(ngram_min=1, ngram_max=2)
    assert tokenize("a  b", config) == ["a", " ", "b", "a ", " b"]
    assert tokenize("我的卡", config) == ["我", "的", "卡", "我的", "的卡"]


def test_lowercase_switch():
    assert tokenize("ABC", TokenizerConfig(mode=WORD, lowercase=False)) == \
        ["ABC"]


def test_tokenizer_config_checks():
    with pytest.raises(ValidationError):
        TokenizerConfig(mode="bpe")
    with pytest.raises(ValidationError):
        TokenizerConfig(ngram_min=3, ngram_max=2)


def test_smoothed_idf_and_sorted_vocabulary():
    vectorizer = fit_vectorizer(["a b", "a c"], WORDS)
    assert vectorizer.vocabulary == {"a": 0, "b": 1, "c": 2}
    assert vectorizer.idf[0] == pytest.approx(1.0)
    assert vectorizer.idf[1] == pytest.approx(math.log(3 / 2) + 1)


def test_tfidf_row_values():
    vectorizer = fit_vectorizer(["a b", "a c"], WORDS)
    row = vectorize(vectorizer, "a b").toarray().ravel()
    idf_b = 1 + math.log(1.5)
    norm = math.sqrt(1 + idf_b ** 2)
    assert row[0] == pytest.approx(1 / norm, abs=1e-12)
    assert row[1] == pytest.approx(idf_b / norm, abs=1e-12)
    assert row[2] == 0.0
    assert row[0] == pytest.approx(0.580, abs=1e-3)
    assert row[1] == pytest.approx(0.815, abs=1e-3)


def test_vocabulary_independent_of_document_order():
    docs = ["x y z", "y z", "z w", "w x"]
    first = fit_vectorizer(docs, WORDS)
    second = fit_vectorizer(list(reversed(docs)), WORDS)
    assert first.vocabulary == second.vocabulary
    assert np.array_equal(first.idf, second.idf)


def test_min_doc_freq_and_vocab_cap():
    docs = ["a b", "a c"]
    assert fit_vectorizer(docs, WORDS, TrainConfig(min_doc_freq=2)) \
        .vocabulary == {"a": 0}
    capped = fit_vectorizer(docs, WORDS,
                            TrainConfig(min_doc_freq=1, vocab_size_max=2))
    assert capped.vocabulary == {"a": 0, "b": 1}


def test_rows_are_unit_norm_or_zero():
    vectorizer = fit_vectorizer(["a b b", "a c"], WORDS)
    row = vectorize(vectorizer, "a b b").toarray().ravel()
    assert np.linalg.norm(row) == pytest.approx(1.0, abs=1e-12)
    assert row[1] > row[0]
    assert not vectorize(vectorizer, "zzz").toarray().any()


def test_transform_many_matches_one_at_a_time():
    vectorizer = fit_vectorizer(["a b", "b c", "c a"], WORDS)
    many = vectorizer.transform(["a b", "c"]).toarray()
    assert np.array_equal(many[1], vectorize(vectorizer, "c").toarray()[0])


def test_empty_fit_fails():
    with pytest.raises(TrainingError):
        fit_vectorizer([], WORDS)
