"""
Discriminating models. Every discriminator offers the same small interface:
 - score(text) returning a Verdict
 - label_names, the K class names in index order
 - num_classes and identity() for reports

The built-in model is trained here from a corpus; a remote model is only
called. The kind named in the config picks the loader.
"""

from .features import (
    TokenizerConfig, Vectorizer, tokenize, fit_vectorizer, vectorize,
    CHAR_NGRAM, WORD
)
from .linear import (
    TrainConfig, DiscriminatorModel, softmax, loss_and_gradient,
    train_classifier, evaluate_accuracy, score
)
from .model_file import save_model, load_model
from .remote import (
    RemoteClassifierConfig, RemoteClassifier, remote_score, post_json
)


def _load_builtin(settings, label_names):
    # pylint: disable=unused-argument
    return load_model(settings["model_path"])


def _load_remote(settings, label_names):
    return RemoteClassifier(RemoteClassifierConfig(
        endpoint=settings["endpoint"],
        label_names=tuple(label_names),
        timeout=settings["timeout"],
        max_in_flight=settings["max_in_flight"],
        max_retries=settings["max_retries"],
    ))


DISCRIMINATOR_KIND_TO_LOADER = {
    "builtin": _load_builtin,
    "remote": _load_remote,
}
