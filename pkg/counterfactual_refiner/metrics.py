"""Evaluation of a batch of refinements: success rate, cosine similarity
between original and output embeddings, and adversarial accuracy, plus the
report they are rendered into."""
import json
import math
import logging
import collections
from dataclasses import dataclass

import numpy as np
import requests
from tenacity import (
    Retrying, retry_if_exception_type, stop_after_attempt,
    wait_exponential_jitter
)

from .structures import (
    MetricError, ValidationError, RemoteTransportError, CorpusError
)
from .discriminator.remote import post_json

REPORT_SCHEMA = "report_v1"

HIGHER = "higher"
LOWER = "lower"
METRIC_DIRECTIONS = collections.OrderedDict((
    ("success_rate", HIGHER),
    ("mean_cosine", HIGHER),
    ("adversarial_accuracy", LOWER),
))
_ARROWS = {HIGHER: "↑", LOWER: "↓"}


class TfidfEmbedding:
    """Embeds texts in the discriminator's own TF-IDF space"""
    kind = "tfidf"

    def __init__(self, model):
        if not hasattr(model, "vectorizer"):
            raise ValidationError("tfidf embeddings need the builtin "
                                  "discriminator, use a remote embedding")
        self.vectorizer = model.vectorizer

    @property
    def dimension(self):
        """V"""
        return self.vectorizer.size

    def identity(self):
        """Provider name for reports; cosines only compare within one"""
        return "tfidf (V={})".format(self.dimension)

    def embed(self, text):
        """Dense unit-norm (or zero) vector"""
        return self.vectorizer.transform([text]).toarray().ravel()


class RemoteEmbedding:
    """POST {"text": ...} -> {"embedding": [...]}"""
    kind = "remote"

    def __init__(self, endpoint, dimension, timeout=30.0, max_retries=3,
                 session=None, backoff_base=1.0, backoff_jitter=1.0):
        if not endpoint or dimension < 1:
            raise ValidationError(
                "remote embeddings need an endpoint and a dimension > 0")
        self.endpoint = endpoint
        self.dimension = dimension
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_jitter = backoff_jitter
        self.session = session if session is not None else \
            requests.Session()

    def identity(self):
        """Provider name for reports"""
        return "remote {} (d={})".format(self.endpoint, self.dimension)

    def _post(self, text):
        return post_json(self.session, self.endpoint, {"text": text},
                         self.timeout, MetricError)

    def embed(self, text):
        """Vector from the endpoint, checked against the dimension"""
        retrying = Retrying(
            retry=retry_if_exception_type(RemoteTransportError),
            stop=stop_after_attempt(self.max_retries + 1),
            wait=wait_exponential_jitter(initial=self.backoff_base,
                                         exp_base=2,
                                         jitter=self.backoff_jitter),
            reraise=True,
        )
        try:
            body = retrying(self._post, text)
        except RemoteTransportError as error:
            raise MetricError("embedding endpoint failed after {} "
                              "retries: {}".format(self.max_retries,
                                                   error)) from None
        values = body.get("embedding") if isinstance(body, dict) else None
        if not isinstance(values, list):
            raise MetricError("{}: response has no embedding".format(
                self.endpoint))
        if len(values) != self.dimension:
            raise MetricError("embedding dimension {} != configured "
                              "{}".format(len(values), self.dimension))
        return np.asarray(values, dtype=np.float64)


EMBEDDING_KIND_TO_PROVIDER = {
    "tfidf": lambda settings, model: TfidfEmbedding(model),
    "remote": lambda settings, model: RemoteEmbedding(
        settings["endpoint"], settings["dimension"], settings["timeout"],
        settings["max_retries"]),
}


def embed(provider, text):
    """Embedding of one text"""
    return provider.embed(text)


def cosine_similarity(vec_a, vec_b):
    """a.b / (|a||b|), 0.0 when either vector is zero"""
    vec_a = np.asarray(vec_a, dtype=np.float64).ravel()
    vec_b = np.asarray(vec_b, dtype=np.float64).ravel()
    if vec_a.shape != vec_b.shape:
        raise MetricError("can't compare vectors of length {} and {}".format(
            vec_a.size, vec_b.size))
    norm = np.linalg.norm(vec_a) * np.linalg.norm(vec_b)
    if norm == 0:
        return 0.0
    return float(np.clip(np.dot(vec_a, vec_b) / norm, -1.0, 1.0))


def success_rate(results):
    """Percentage of results that reached the threshold"""
    if not results:
        raise MetricError("success rate of zero results")
    return 100.0 * sum(1 for r in results if r.success) / len(results)


def _correct_count(scorer, results, true_labels, records=None,
                   input_fields=("claim",)):
    if not results:
        raise MetricError("adversarial accuracy of zero results")
    if true_labels is None:
        true_labels = [r.true_label for r in results]
    if len(true_labels) != len(results) or None in true_labels:
        raise MetricError("every result needs a true label")
    correct = 0
    for result, label in zip(results, true_labels):
        if scorer is None:
            predicted = result.output_prediction
        else:
            text = result.output_text
            if records is not None:
                record = records.get(result.trace.doc_id)
                if record is None:
                    raise MetricError("no record for {}".format(
                        result.trace.doc_id))
                text = record.text_for(input_fields, claim=text)
            predicted = scorer.score(text).predicted
        if predicted == label:
            correct += 1
    return correct


def adversarial_accuracy(scorer, results, true_labels=None, records=None,
                         input_fields=("claim",)):
    """Percentage of outputs the discriminator still classifies correctly,
    lower means a stronger attack. Without a scorer the prediction recorded
    during the run is used. With `records` (doc_id -> Record) each output
    is rescored in context, joined with the record's other input_fields."""
    correct = _correct_count(scorer, results, true_labels, records,
                             input_fields)
    return 100.0 * correct / len(results)


def flip_rate(scorer, results, true_labels=None, records=None,
              input_fields=("claim",)):
    """Percentage of outputs no longer classified correctly"""
    correct = _correct_count(scorer, results, true_labels, records,
                             input_fields)
    return 100.0 * (len(results) - correct) / len(results)


@dataclass(frozen=True)
class ReportRow:
    """Per-document line of a report"""
    doc_id: str
    iterations: int
    stop_reason: str
    success: bool
    goal_score: float
    cosine: float


@dataclass(frozen=True)
class Report:
    """Aggregates of one run. mean_cosine covers every attempted document,
    mean_cosine_successful only the successes."""
    strategy: str
    generator: str
    discriminator: str
    embedding: str
    n_attempted: int
    n_succeeded: int
    success_rate: float
    mean_cosine: float
    mean_cosine_successful: float
    adversarial_accuracy: float
    rows: tuple

    def to_dict(self):
        """Plain form for report.json"""
        return collections.OrderedDict((
            ("schema", REPORT_SCHEMA),
            ("strategy", self.strategy),
            ("generator", self.generator),
            ("discriminator", self.discriminator),
            ("embedding", self.embedding),
            ("denominator", "documents eligible by the discriminator's "
                            "own prediction"),
            ("directions", METRIC_DIRECTIONS),
            ("n_attempted", self.n_attempted),
            ("n_succeeded", self.n_succeeded),
            ("success_rate", self.success_rate),
            ("mean_cosine", self.mean_cosine),
            ("mean_cosine_successful", self.mean_cosine_successful),
            ("adversarial_accuracy", self.adversarial_accuracy),
            ("rows", [collections.OrderedDict((
                ("doc_id", row.doc_id),
                ("iterations", row.iterations),
                ("stop_reason", row.stop_reason),
                ("success", row.success),
                ("goal_score", row.goal_score),
                ("cosine", row.cosine),
            )) for row in self.rows]),
        ))

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        if data.get("schema") != REPORT_SCHEMA:
            raise CorpusError("report schema {!r}, expected {!r}".format(
                data.get("schema"), REPORT_SCHEMA))
        rows = tuple(ReportRow(**row) for row in data["rows"])
        fields = {k: data[k] for k in (
            "strategy", "generator", "discriminator", "embedding",
            "n_attempted", "n_succeeded", "success_rate", "mean_cosine",
            "mean_cosine_successful", "adversarial_accuracy")}
        return cls(rows=rows, **fields)

    def to_json(self):
        """Deterministic JSON text"""
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + \
            "\n"

    def to_text(self):
        """Human readable table"""
        lines = [
            "strategy       {}".format(self.strategy),
            "generator      {}".format(self.generator),
            "discriminator  {}".format(self.discriminator),
            "embedding      {}".format(self.embedding),
            "",
            "{:<28} {}".format("Success Rate (↑)",
                               format_success_rate(self.success_rate)),
            "{:<28} {}".format("Cosine Sim. (↑)",
                               format_cosine(self.mean_cosine)),
            "{:<28} {}".format("Cosine Sim., successes",
                               format_cosine(self.mean_cosine_successful)),
        ]
        if self.adversarial_accuracy is not None:
            lines.append("{:<28} {}".format(
                "Adv Acc. (↓)",
                format_adversarial(self.adversarial_accuracy)))
        lines.append("{:<28} {} of {}".format(
            "Succeeded", self.n_succeeded, self.n_attempted))
        lines.append("")
        lines.append("{:<24} {:>5} {:<17} {:>7} {:>7}".format(
            "doc", "iter", "stop", "score", "cosine"))
        for row in self.rows:
            lines.append("{:<24} {:>5} {:<17} {:>7.3f} {:>7.3f}".format(
                row.doc_id[:24], row.iterations, row.stop_reason,
                row.goal_score, row.cosine))
        return "\n".join(lines) + "\n"


def format_success_rate(value):
    """Two decimals"""
    return "{:.2f}%".format(value)


def format_adversarial(value):
    """One decimal"""
    return "{:.1f}".format(value)


def format_cosine(value):
    """Three decimals, or n/a"""
    if value is None:
        return "n/a"
    return "{:.3f}".format(value)


def _mean(values):
    if not values:
        return None
    return math.fsum(values) / len(values)


def build_report(results, provider, scorer=None, strategy="", generator="",
                 discriminator="", records=None, input_fields=("claim",)):
    """Aggregate a batch. Failed documents still contribute the cosine of
    their best-effort output. `scorer`, `records` and `input_fields` are
    passed on to adversarial_accuracy."""
    if not results:
        raise MetricError("can't report on zero results")
    rows = []
    for result in results:
        cosine = cosine_similarity(provider.embed(result.trace.original_text),
                                   provider.embed(result.output_text))
        rows.append(ReportRow(
            doc_id=result.trace.doc_id,
            iterations=len(result.trace.iterations),
            stop_reason=result.trace.stop_reason,
            success=result.success,
            goal_score=result.output_goal_score,
            cosine=cosine,
        ))

    adv_acc = None
    if all(r.true_label is not None for r in results):
        adv_acc = adversarial_accuracy(scorer, results, records=records,
                                       input_fields=input_fields)
    else:
        logging.info("True labels missing, skipping adversarial accuracy")

    n_succeeded = sum(1 for r in results if r.success)
    return Report(
        strategy=strategy,
        generator=generator,
        discriminator=discriminator,
        embedding=provider.identity(),
        n_attempted=len(results),
        n_succeeded=n_succeeded,
        success_rate=success_rate(results),
        mean_cosine=_mean([row.cosine for row in rows]),
        mean_cosine_successful=_mean([row.cosine for row in rows
                                      if row.success]),
        adversarial_accuracy=adv_acc,
        rows=tuple(rows),
    )


def load_report(path):
    """Report back from report.json"""
    try:
        with open(path, "r", encoding="utf-8") as in_file:
            data = json.load(in_file)
    except OSError as error:
        raise CorpusError("can't read report {}: {}".format(
            path, error.strerror or error)) from None
    except json.JSONDecodeError:
        raise CorpusError("report {} is not JSON".format(path)) from None
    return Report.from_dict(data)


def compare_reports(reports):
    """Strategy x generator table over several runs"""
    if not reports:
        raise MetricError("nothing to compare")
    header = "{:<10} {:<28} {:>18} {:>16} {:>14}".format(
        "Strategy", "Generator",
        "Success Rate (↑)", "Cosine Sim. (↑)",
        "Adv Acc. (↓)")
    lines = [header, "-" * len(header)]
    for report in reports:
        adv = "-" if report.adversarial_accuracy is None else \
            format_adversarial(report.adversarial_accuracy)
        lines.append("{:<10} {:<28} {:>18} {:>16} {:>14}".format(
            report.strategy, report.generator[:28],
            format_success_rate(report.success_rate),
            format_cosine(report.mean_cosine), adv))
    return "\n".join(lines) + "\n"
