"""Shared fixtures: a synthetic keyword corpus, a keyword oracle standing in
for a trained discriminator, and a fake chat-completions client."""
import json
import math
import random
import re
import types

import httpx
import openai
import pytest

from counterfactual_refiner.structures import Verdict
from counterfactual_refiner.corpus import Record, Corpus, FINDR_LABEL_NAMES

FILLER = ("bank", "account", "transfer", "branch", "customer", "statement",
          "card", "loan", "payment", "month")
KEYWORDS = {
    "reasonable": ("contract", "invoice", "evidence", "refund", "warranty",
                   "receipt"),
    "unreasonable": ("angry", "rumor", "whatever", "demand", "ridiculous",
                     "shouting"),
}


def keyword_records(n_docs=200, seed=0, flip_labels=False):
    """Dispute records whose class shows in three keywords each"""
    rng = random.Random(seed)
    records = []
    for i in range(n_docs):
        label = "reasonable" if i % 2 else "unreasonable"
        words = rng.sample(FILLER, 3) + rng.sample(KEYWORDS[label], 3)
        rng.shuffle(words)
        if flip_labels:
            label = "unreasonable" if label == "reasonable" else "reasonable"
        records.append({
            "id": "doc-{:03d}".format(i),
            "claim": " ".join(words),
            "rebuttal": "",
            "judgment": "",
            "raw_label": label,
        })
    return records


def write_jsonl(path, rows):
    """One JSON object per line"""
    with open(path, "w", encoding="utf-8") as out_file:
        for row in rows:
            out_file.write(json.dumps(row) + "\n")
    return str(path)


@pytest.fixture
def keyword_corpus_path(tmp_path):
    """200-document binary corpus on disk"""
    return write_jsonl(tmp_path / "corpus.jsonl", keyword_records())


def sigmoid(value):
    """Logistic function"""
    return 1.0 / (1.0 + math.exp(-value))


class KeywordOracle:
    """p(target) = sigmoid(2 * count - 3) where count is the number of
    times the keyword occurs; class 1 is the target"""
    kind = "oracle"

    def __init__(self, keyword="formally", label_names=FINDR_LABEL_NAMES):
        self.keyword = keyword
        self.pattern = re.compile(r"\b{}\b".format(re.escape(keyword)))
        self.label_names = tuple(label_names)
        self.calls = 0

    def identity(self):
        """Report name"""
        return "keyword oracle ({})".format(self.keyword)

    def count(self, text):
        """Keyword occurrences"""
        return len(self.pattern.findall(text))

    def score(self, text):
        """Verdict over (not target, target)"""
        self.calls += 1
        prob = sigmoid(2 * self.count(text) - 3)
        return Verdict.from_probabilities((1.0 - prob, prob))


@pytest.fixture
def oracle():
    """Keyword oracle on "formally" """
    return KeywordOracle()


def plain_records(n_docs=4, label=0):
    """Records without the oracle keyword"""
    return [Record(id="r{}".format(i),
                   claim="the bank froze my account number {}".format(i),
                   label=label)
            for i in range(n_docs)]


@pytest.fixture
def plain_corpus():
    """Four unreasonable records the oracle scores at sigmoid(-3)"""
    return Corpus(tuple(plain_records()), FINDR_LABEL_NAMES, "findr")


def chat_response(text):
    """Shape of a chat completion the generator reads"""
    message = types.SimpleNamespace(content=text)
    return types.SimpleNamespace(
        choices=[types.SimpleNamespace(message=message)])


REQUEST = httpx.Request("POST", "http://localhost/v1/chat/completions")


def rate_limit_error():
    """HTTP 429 as the openai client raises it"""
    return openai.RateLimitError(
        "rate limited", response=httpx.Response(429, request=REQUEST),
        body=None)


def server_error():
    """HTTP 500 as the openai client raises it"""
    return openai.InternalServerError(
        "server error", response=httpx.Response(500, request=REQUEST),
        body=None)


def bad_request_error():
    """HTTP 400 as the openai client raises it"""
    return openai.BadRequestError(
        "bad request", response=httpx.Response(400, request=REQUEST),
        body=None)


def timeout_error():
    """Client side timeout"""
    return openai.APITimeoutError(request=REQUEST)


def connection_error():
    """Unreachable endpoint"""
    return openai.APIConnectionError(request=REQUEST)


class FakeChatClient:
    """Stands in for openai.OpenAI. `outcomes` are consumed one per call:
    a string is returned as the completion, an exception is raised."""

    def __init__(self, outcomes=(), models_error=None):
        self.outcomes = list(outcomes)
        self.requests = []
        self.models_error = models_error
        self.chat = types.SimpleNamespace(
            completions=types.SimpleNamespace(create=self._create))
        self.models = types.SimpleNamespace(list=self._list_models)

    def _create(self, **kwargs):
        self.requests.append(kwargs)
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, BaseException):
            raise outcome
        return chat_response(outcome)

    def _list_models(self):
        if self.models_error is not None:
            raise self.models_error
        return []
