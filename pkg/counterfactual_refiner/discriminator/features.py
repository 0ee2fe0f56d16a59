"""Featurization: tokenizing text and turning it into L2-normalized TF-IDF
rows"""
import math
import logging
import unicodedata
import collections
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..structures import TrainingError, ValidationError

CHAR_NGRAM = "char_ngram"
WORD = "word"


@dataclass(frozen=True)
class TokenizerConfig:
    """How text is cut into features. The n-gram bounds only matter in
    char_ngram mode."""
    mode: str = CHAR_NGRAM
    ngram_min: int = 1
    ngram_max: int = 2
    lowercase: bool = True

    def __post_init__(self):
        if self.mode not in (CHAR_NGRAM, WORD):
            raise ValidationError(
                "unknown tokenizer mode {!r}".format(self.mode))
        if self.mode == CHAR_NGRAM and not \
                1 <= self.ngram_min <= self.ngram_max:
            raise ValidationError(
                "need 1 <= ngram_min <= ngram_max, got {}..{}".format(
                    self.ngram_min, self.ngram_max))

    def to_dict(self):
        """Plain form, used in the model file header"""
        return collections.OrderedDict((
            ("mode", self.mode),
            ("ngram_min", self.ngram_min),
            ("ngram_max", self.ngram_max),
            ("lowercase", self.lowercase),
        ))


def _is_punctuation(char):
    return unicodedata.category(char).startswith("P")


def tokenize(text, config):
    """Cut a text into feature strings.

    char_ngram: every contiguous character n-gram for n in
    [ngram_min, ngram_max] over the whitespace-normalized text, shorter
    n-grams first.
    word: split on whitespace, strip punctuation from both ends of every
    word, drop what's left empty.
    """
    if config.lowercase:
        text = text.lower()
    if config.mode == WORD:
        tokens = []
        for word in text.split():
            start, end = 0, len(word)
            while start < end and _is_punctuation(word[start]):
                start += 1
            while end > start and _is_punctuation(word[end - 1]):
                end -= 1
            if start < end:
                tokens.append(word[start:end])
        return tokens

    normalized = " ".join(text.split())
    tokens = []
    for size in range(config.ngram_min, config.ngram_max + 1):
        for start in range(len(normalized) - size + 1):
            tokens.append(normalized[start:start + size])
    return tokens


class Vectorizer:
    """Maps feature strings to columns and weights term counts by idf.

    Column indices are assigned in lexicographic order of the features,
    so the same vocabulary always gives the same layout no matter what
    order the documents came in."""
    def __init__(self, vocabulary, idf, config):
        self.vocabulary = dict(vocabulary)
        self.idf = np.asarray(idf, dtype=np.float64)
        self.config = config
        if sorted(self.vocabulary.values()) != list(range(len(self.idf))):
            raise TrainingError("vocabulary indices are not 0..V-1")

    @property
    def size(self):
        """Number of columns"""
        return len(self.idf)

    def features(self):
        """Feature strings in column order"""
        ordered = [None] * self.size
        for feature, index in self.vocabulary.items():
            ordered[index] = feature
        return ordered

    def transform(self, texts):
        """Vectorize many texts into one CSR matrix, one row per text"""
        indptr = [0]
        indices = []
        data = []
        for text in texts:
            counts = collections.Counter(
                self.vocabulary[tok] for tok in tokenize(text, self.config)
                if tok in self.vocabulary)
            columns = sorted(counts)
            values = np.array([counts[c] for c in columns],
                              dtype=np.float64) * self.idf[columns]
            norm = np.linalg.norm(values)
            if norm > 0:
                values = values / norm
            indices.extend(columns)
            data.extend(values.tolist())
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (np.array(data, dtype=np.float64),
             np.array(indices, dtype=np.int64),
             np.array(indptr, dtype=np.int64)),
            shape=(len(indptr) - 1, self.size))


def fit_vectorizer(docs, config, train=None):
    """Learn vocabulary and smoothed idf from a list of documents.

    Features below train.min_doc_freq are dropped, then the
    train.vocab_size_max most document-frequent survive (ties by feature
    string). Smoothed idf is ln((1 + N) / (1 + df)) + 1, so every weight
    is at least 1. Without a train config every feature is kept.
    """
    docs = list(docs)
    if not docs:
        raise TrainingError("can't fit a vectorizer on zero documents")
    min_doc_freq = train.min_doc_freq if train is not None else 1
    vocab_size_max = train.vocab_size_max if train is not None else None

    doc_freq = collections.Counter()
    for doc in docs:
        doc_freq.update(set(tokenize(doc, config)))

    kept = [f for f, df in doc_freq.items() if df >= min_doc_freq]
    if vocab_size_max is not None and len(kept) > vocab_size_max:
        kept.sort(key=lambda f: (-doc_freq[f], f))
        kept = kept[:vocab_size_max]
    kept.sort()
    if not kept:
        logging.warning("Vectorizer vocabulary is empty (min_doc_freq=%d)",
                        min_doc_freq)

    n_docs = len(docs)
    vocabulary = {feature: index for index, feature in enumerate(kept)}
    idf = [math.log((1 + n_docs) / (1 + doc_freq[f])) + 1.0 for f in kept]
    logging.info("Fitted vectorizer: %d features from %d documents",
                 len(kept), n_docs)
    return Vectorizer(vocabulary, idf, config)


def vectorize(vectorizer, text):
    """One text as a 1 x V sparse row"""
    return vectorizer.transform([text])
