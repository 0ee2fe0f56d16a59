"""Client for a discriminator hosted behind an HTTP endpoint, so a
fine-tuned model served elsewhere can be plugged in unchanged.

Wire format: POST {"text": ...} -> {"probabilities": [...], "labels": [...]}
"""
import math
import logging
import threading
from dataclasses import dataclass

import requests
from tenacity import (
    Retrying, retry_if_exception_type, stop_after_attempt,
    wait_exponential_jitter
)

from ..structures import (
    Verdict, RemoteTransportError, MalformedResponseError, ValidationError
)

# Sums this close to 1 are taken as is (after renormalizing), anything off
# by more than RENORMALIZE_LIMIT is rejected.
SUM_TOLERANCE = 1e-6
RENORMALIZE_LIMIT = 0.05


@dataclass(frozen=True)
class RemoteClassifierConfig:
    """Where the classifier lives and how hard to try reaching it"""
    endpoint: str
    label_names: tuple
    timeout: float = 30.0
    max_in_flight: int = 8
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_jitter: float = 1.0

    def __post_init__(self):
        if not self.endpoint:
            raise ValidationError("remote discriminator needs an endpoint")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")
        if len(self.label_names) < 2:
            raise ValidationError(
                "remote discriminator needs at least 2 label names")


def normalize_probabilities(values, n_classes):
    """Validate a probability list from the wire"""
    if not isinstance(values, list) or len(values) != n_classes:
        raise MalformedResponseError(
            "expected {} probabilities, got {!r}".format(n_classes, values))
    probs = []
    for value in values:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedResponseError(
                "probability {!r} is not a number".format(value))
        if math.isnan(value) or value < 0:
            raise MalformedResponseError(
                "probability {!r} is negative or NaN".format(value))
        probs.append(float(value))
    total = math.fsum(probs)
    if abs(total - 1.0) > RENORMALIZE_LIMIT:
        raise MalformedResponseError(
            "probabilities sum to {!r}, too far from 1".format(total))
    if abs(total - 1.0) > SUM_TOLERANCE:
        logging.warning("Renormalizing remote probabilities summing to %r",
                        total)
    return [p / total for p in probs]


def post_json(session, endpoint, payload, timeout, client_error):
    """POST a JSON payload and decode the JSON answer. Transport failures,
    429 and 5xx raise RemoteTransportError (retryable); other 4xx answers
    and undecodable bodies raise `client_error`."""
    try:
        response = session.post(endpoint, json=payload, timeout=timeout)
    except requests.RequestException as error:
        raise RemoteTransportError(endpoint, "{}: {}".format(
            type(error).__name__, error)) from None
    if response.status_code == 429 or response.status_code >= 500:
        raise RemoteTransportError(
            endpoint, "HTTP {}".format(response.status_code))
    if response.status_code >= 400:
        raise client_error("{}: HTTP {}".format(endpoint,
                                                response.status_code))
    try:
        return response.json()
    except ValueError:
        raise client_error(
            "{}: response is not JSON".format(endpoint)) from None


class RemoteClassifier:
    """Scores texts through the remote endpoint. Safe to call from many
    threads, at most max_in_flight requests are open at once."""
    kind = "remote"

    def __init__(self, config, session=None):
        self.config = config
        self.label_names = tuple(config.label_names)
        self.session = session if session is not None else \
            requests.Session()
        self._in_flight = threading.BoundedSemaphore(config.max_in_flight)

    @property
    def num_classes(self):
        """K"""
        return len(self.label_names)

    def identity(self):
        """Short description used in reports"""
        return "remote {}".format(self.config.endpoint)

    def _post(self, text):
        with self._in_flight:
            return post_json(self.session, self.config.endpoint,
                             {"text": text}, self.config.timeout,
                             MalformedResponseError)

    def score(self, text):
        """POST the text and turn the answer into a Verdict"""
        retrying = Retrying(
            retry=retry_if_exception_type(RemoteTransportError),
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential_jitter(
                initial=self.config.backoff_base, exp_base=2,
                jitter=self.config.backoff_jitter),
            reraise=True,
        )
        body = retrying(self._post, text)
        if not isinstance(body, dict) or "probabilities" not in body:
            raise MalformedResponseError(
                "{}: response has no probabilities".format(
                    self.config.endpoint))
        labels = body.get("labels")
        if labels is not None and list(labels) != list(self.label_names):
            logging.warning("Remote labels %s differ from configured %s",
                            labels, list(self.label_names))
        return Verdict.from_probabilities(
            normalize_probabilities(body["probabilities"], self.num_classes))


def remote_score(config, text, session=None):
    """One-off scoring call"""
    return RemoteClassifier(config, session).score(text)
