import threading
import time

import pytest
import requests

from counterfactual_refiner.discriminator import (
    RemoteClassifierConfig, RemoteClassifier, remote_score
)
from counterfactual_refiner.discriminator.remote import (
    normalize_probabilities
)
from counterfactual_refiner.engine import (
    AttackGoal, EngineConfig, run_batch, MSMI, SCORER_ERROR
)
from counterfactual_refiner.generator import GeneratorConfig, build_generator
from counterfactual_refiner.structures import (
    RemoteTransportError, MalformedResponseError, ValidationError
)

ENDPOINT = "http://classifier.local/score"


class FakeResponse:
    def __init__(self, status_code=200, body=None):
        self.status_code = status_code
        self.body = body

    def json(self):
        if self.body is None:
            raise ValueError("no JSON")
        return self.body


class FakeSession:
    """Replays responses; an exception instance is raised instead"""
    def __init__(self, responses, delay=0.0):
        self.responses = list(responses)
        self.delay = delay
        self.posts = []
        self.lock = threading.Lock()
        self.active = 0
        self.peak = 0

    def post(self, url, json=None, timeout=None):
        with self.lock:
            self.posts.append((url, json, timeout))
            self.active += 1
            self.peak = max(self.peak, self.active)
            response = self.responses.pop(0) if len(self.responses) > 1 \
                else self.responses[0]
        try:
            if self.delay:
                time.sleep(self.delay)
            if isinstance(response, BaseException):
                raise response
            return response
        finally:
            with self.lock:
                self.active -= 1


def make_config(**kwargs):
    settings = dict(endpoint=ENDPOINT,
                    label_names=("unreasonable", "reasonable"),
                    backoff_base=0.0, backoff_jitter=0.0)
    settings.update(kwargs)
    return RemoteClassifierConfig(**settings)


def test_scores_text():
    session = FakeSession([FakeResponse(body={"probabilities": [0.2, 0.8]})])
    verdict = remote_score(make_config(), "a claim", session)
    assert verdict.predicted == 1
    assert verdict.probabilities == pytest.approx((0.2, 0.8))
    assert session.posts[0][1] == {"text": "a claim"}


def test_renormalizes_small_drift(caplog):
    probs = normalize_probabilities([0.51, 0.51], 2)
    assert sum(probs) == pytest.approx(1.0)
    assert "Renormalizing" in caplog.text


def test_rejects_bad_probabilities():
    with pytest.raises(MalformedResponseError):
        normalize_probabilities([0.6, 0.6], 2)
    with pytest.raises(MalformedResponseError):
        normalize_probabilities([1.0], 2)
    with pytest.raises(MalformedResponseError):
        normalize_probabilities([-0.1, 1.1], 2)
    with pytest.raises(MalformedResponseError):
        normalize_probabilities(["0.5", 0.5], 2)


def test_retries_server_errors():
    session = FakeSession([FakeResponse(503), FakeResponse(429),
                           FakeResponse(body={"probabilities": [1.0, 0.0]})])
    classifier = RemoteClassifier(make_config(max_retries=2), session)
    assert classifier.score("x").predicted == 0
    assert len(session.posts) == 3


def test_gives_up_after_max_retries():
    session = FakeSession([FakeResponse(500)])
    classifier = RemoteClassifier(make_config(max_retries=1), session)
    with pytest.raises(RemoteTransportError) as info:
        classifier.score("x")
    assert info.value.endpoint == ENDPOINT
    assert len(session.posts) == 2


@pytest.mark.parametrize("error", [
    requests.ConnectionError("refused"),
    requests.Timeout("slow"),
    requests.exceptions.ChunkedEncodingError("connection broken"),
    requests.exceptions.ContentDecodingError("bad gzip"),
    requests.TooManyRedirects("loop"),
])
def test_request_failures_are_transport_errors(error):
    session = FakeSession([error])
    classifier = RemoteClassifier(make_config(max_retries=0), session)
    with pytest.raises(RemoteTransportError):
        classifier.score("x")

    session = FakeSession([error,
                           FakeResponse(body={"probabilities": [0.3, 0.7]})])
    classifier = RemoteClassifier(make_config(max_retries=1), session)
    assert classifier.score("x").predicted == 1
    assert len(session.posts) == 2


def test_client_errors_are_not_retried():
    session = FakeSession([FakeResponse(404)])
    with pytest.raises(MalformedResponseError):
        RemoteClassifier(make_config(), session).score("x")
    assert len(session.posts) == 1

    session = FakeSession([FakeResponse(200, body=None)])
    with pytest.raises(MalformedResponseError):
        RemoteClassifier(make_config(), session).score("x")

    session = FakeSession([FakeResponse(200, body={"label": 1})])
    with pytest.raises(MalformedResponseError):
        RemoteClassifier(make_config(), session).score("x")


def test_in_flight_cap():
    session = FakeSession(
        [FakeResponse(body={"probabilities": [0.5, 0.5]})], delay=0.02)
    classifier = RemoteClassifier(make_config(max_in_flight=2), session)
    threads = [threading.Thread(target=classifier.score, args=("x",))
               for _ in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(session.posts) == 8
    assert session.peak <= 2


def test_config_checks():
    with pytest.raises(ValidationError):
        make_config(endpoint="")
    with pytest.raises(ValidationError):
        make_config(label_names=("only",))


class KeywordSession:
    """Answers every text except those holding a keyword, where the
    connection breaks mid-body"""
    def __init__(self, keyword):
        self.keyword = keyword
        self.posts = []
        self.lock = threading.Lock()

    def post(self, url, json=None, timeout=None):
        with self.lock:
            self.posts.append(json["text"])
        if self.keyword in json["text"]:
            raise requests.exceptions.ChunkedEncodingError(
                "connection broken")
        return FakeResponse(body={"probabilities": [0.9, 0.1]})


def test_broken_connection_only_fails_its_document(plain_corpus):
    classifier = RemoteClassifier(make_config(max_retries=0),
                                  KeywordSession("formally"))
    generator = build_generator(GeneratorConfig(script=("formally",)))
    cfg = EngineConfig(threshold=0.5, max_iterations=5, strategy=MSMI,
                       goal=AttackGoal.targeted(1))
    results = run_batch(plain_corpus, classifier, generator, cfg,
                        parallelism=2)
    assert len(results) == len(plain_corpus)
    for result in results:
        assert result.trace.stop_reason == SCORER_ERROR
        assert "ChunkedEncodingError" in result.trace.error
        assert not result.success
