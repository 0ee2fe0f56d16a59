"""The built-in discriminating model: multinomial logistic regression over
TF-IDF features, trained with plain SGD and checkpoint selection on the
validation split."""
import logging
from dataclasses import dataclass

import numpy as np

from ..structures import Verdict, TrainingError, CorpusError, ValidationError
from .features import fit_vectorizer


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and vocabulary settings"""
    epochs: int = 10
    learning_rate_0: float = 0.1
    l2_lambda: float = 1e-4
    seed: int = 0
    vocab_size_max: int = 50000
    min_doc_freq: int = 2

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate_0 <= 0:
            raise ValidationError("learning_rate_0 must be positive")
        if self.l2_lambda < 0:
            raise ValidationError("l2_lambda must be >= 0")
        if self.vocab_size_max < 1 or self.min_doc_freq < 1:
            raise ValidationError(
                "vocab_size_max and min_doc_freq must be >= 1")


def softmax(logits):
    """Row-wise softmax with max subtraction"""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


class DiscriminatorModel:
    """K x V weights, K biases and the vectorizer that feeds them.
    Immutable once built, so scoring can run from many threads."""
    kind = "builtin"

    def __init__(self, vectorizer, weights, bias, label_names):
        self.vectorizer = vectorizer
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        self.label_names = tuple(label_names)
        self.weights.setflags(write=False)
        self.bias.setflags(write=False)

        n_classes = len(self.label_names)
        if n_classes < 2:
            raise TrainingError("a discriminator needs at least 2 classes")
        if self.weights.shape != (n_classes, vectorizer.size):
            raise TrainingError("weights have shape {}, expected {}".format(
                self.weights.shape, (n_classes, vectorizer.size)))
        if self.bias.shape != (n_classes,):
            raise TrainingError("bias has shape {}, expected ({},)".format(
                self.bias.shape, n_classes))

    @property
    def num_classes(self):
        """K"""
        return len(self.label_names)

    def logits(self, text):
        """W x + b for one text"""
        row = self.vectorizer.transform([text])
        return np.asarray(row @ self.weights.T).ravel() + self.bias

    def score(self, text):
        """softmax(W x + b) as a Verdict"""
        return Verdict.from_probabilities(softmax(self.logits(text)))

    def identity(self):
        """Short description used in reports"""
        return "builtin tfidf-logreg (V={}, K={})".format(
            self.vectorizer.size, self.num_classes)


def score(model, text):
    """Score a text with any discriminator"""
    return model.score(text)


def loss_and_gradient(weights, bias, features, labels, l2_lambda):
    """Mean cross-entropy + (l2/2)|W|^2 and its gradient.

    features is an n x V (sparse or dense) matrix, labels n class indices.
    Returns (loss, dW, db).
    """
    labels = np.asarray(labels, dtype=np.int64)
    n_docs = features.shape[0]
    logits = np.asarray(features @ weights.T) + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n_docs)
    loss = float(np.mean(log_norm - shifted[rows, labels]))
    loss += 0.5 * l2_lambda * float(np.sum(weights * weights))

    residual = softmax(logits)
    residual[rows, labels] -= 1.0
    residual /= n_docs
    grad_w = np.asarray((features.T @ residual).T) + l2_lambda * weights
    grad_b = residual.sum(axis=0)
    return loss, grad_w, grad_b


def _texts(corpus, input_fields):
    return [r.text_for(input_fields) for r in corpus]


def evaluate_accuracy(model, corpus, input_fields=("claim",)):
    """Fraction of records whose predicted class is the true class"""
    if len(corpus) == 0:
        raise CorpusError("can't evaluate accuracy on an empty corpus")
    correct = sum(1 for r in corpus
                  if model.score(r.text_for(input_fields)).predicted ==
                  r.label)
    return correct / len(corpus)


def train_classifier(train, val, tcfg, tok, input_fields=("claim",)):
    """Fit the vectorizer on the training split, then run SGD with step
    eta_t = eta_0 / (1 + lambda * eta_0 * t) over a seeded shuffle each
    epoch. The epoch with the best validation accuracy wins, ties go to the
    earliest."""
    if len(train) == 0:
        raise TrainingError("training set is empty")
    label_names = train.label_names
    n_classes = len(label_names)
    if n_classes < 2:
        raise TrainingError("need at least 2 classes, got {}".format(
            n_classes))
    for rec in train:
        if not 0 <= rec.label < n_classes:
            raise TrainingError("record {} has class {} outside {} "
                                "classes".format(rec.id, rec.label,
                                                 n_classes))

    texts = _texts(train, input_fields)
    vectorizer = fit_vectorizer(texts, tok, tcfg)
    features = vectorizer.transform(texts)
    labels = np.array([r.label for r in train], dtype=np.int64)
    rows = [(features.indices[features.indptr[i]:features.indptr[i + 1]],
             features.data[features.indptr[i]:features.indptr[i + 1]])
            for i in range(features.shape[0])]

    weights = np.zeros((n_classes, vectorizer.size), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)
    rng = np.random.default_rng(tcfg.seed)
    eta_0 = tcfg.learning_rate_0
    l2_lambda = tcfg.l2_lambda

    if len(val) == 0:
        logging.warning("Validation split is empty, selecting the "
                        "checkpoint on training accuracy")
        val = train

    best = None
    step = 0
    for epoch in range(1, tcfg.epochs + 1):
        for i in rng.permutation(len(rows)):
            columns, values = rows[i]
            eta = eta_0 / (1.0 + l2_lambda * eta_0 * step)
            residual = softmax(weights[:, columns] @ values + bias)
            residual[labels[i]] -= 1.0
            if l2_lambda:
                weights *= 1.0 - eta * l2_lambda
            weights[:, columns] -= eta * np.outer(residual, values)
            bias -= eta * residual
            step += 1

        snapshot = DiscriminatorModel(vectorizer, weights, bias, label_names)
        accuracy = evaluate_accuracy(snapshot, val, input_fields)
        logging.info("Epoch %d/%d: validation accuracy %.4f",
                     epoch, tcfg.epochs, accuracy)
        if best is None or accuracy > best[0]:
            best = (accuracy, epoch, snapshot)

    logging.info("Selected epoch %d (validation accuracy %.4f)",
                 best[1], best[0])
    return best[2]
