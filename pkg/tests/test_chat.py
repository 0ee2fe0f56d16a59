import httpx
import openai
import pytest

from counterfactual_refiner.corpus import Record
from counterfactual_refiner.generator import (
    GeneratorConfig, ChatGenerator, TokenBucket, strip_fences
)
from counterfactual_refiner.generator.chat import resolve_api_key
from counterfactual_refiner.generator.prompts import build_initial_prompt
from counterfactual_refiner.structures import (
    GeneratorError, GeneratorTransportError, GeneratorTimeoutError,
    EmptyCompletionError, GeneratorConnectivityError, ValidationError
)

from conftest import (
    FakeChatClient, rate_limit_error, server_error, bad_request_error,
    timeout_error, connection_error, REQUEST
)

DOC = Record("d1", "They froze my card.", 0)


def chat_config(**kwargs):
    settings = dict(kind="chat_endpoint",
                    endpoint_url="http://llm.local/v1",
                    model_name="small-chat", api_key="k",
                    backoff_base=0.0, backoff_jitter=0.0)
    settings.update(kwargs)
    return GeneratorConfig(**settings)


def generate(client, **kwargs):
    generator = ChatGenerator(chat_config(**kwargs), client)
    session = generator.open_session(DOC)
    return session.generate(build_initial_prompt(DOC))


def test_request_shape():
    client = FakeChatClient(["Formal claim."])
    generation = generate(client, temperature=0.2, max_output_tokens=64)
    assert generation.text == "Formal claim."
    assert generation.retries == 0
    request = client.requests[0]
    assert request["model"] == "small-chat"
    assert request["temperature"] == 0.2
    assert request["max_tokens"] == 64
    assert request["messages"][1]["content"].endswith(DOC.claim)


def test_rate_limit_is_retried_and_counted():
    client = FakeChatClient([rate_limit_error(), rate_limit_error(),
                             "Formal claim."])
    generation = generate(client, max_retries=3)
    assert generation.text == "Formal claim."
    assert generation.retries == 2


def test_transport_error_after_retries():
    client = FakeChatClient([server_error()] * 3)
    with pytest.raises(GeneratorTransportError) as info:
        generate(client, max_retries=2)
    assert info.value.retries == 2
    assert len(client.requests) == 3


def test_timeout_error():
    client = FakeChatClient([timeout_error(), timeout_error()])
    with pytest.raises(GeneratorTimeoutError):
        generate(client, max_retries=1)


def test_rejected_request_is_not_retried():
    client = FakeChatClient([bad_request_error(), "unused"])
    with pytest.raises(GeneratorError):
        generate(client, max_retries=3)
    assert len(client.requests) == 1


def test_empty_completion():
    with pytest.raises(EmptyCompletionError):
        generate(FakeChatClient(["  "]))
    with pytest.raises(EmptyCompletionError):
        generate(FakeChatClient(["```\n```"]))


def test_fenced_reply_is_unwrapped():
    assert generate(FakeChatClient(["```text\nFormal claim.\n```"])).text \
        == "Formal claim."
    assert strip_fences("plain") == "plain"
    assert strip_fences("```\na\nb\n```") == "a\nb"


def test_preflight():
    ChatGenerator(chat_config(), FakeChatClient()).preflight()
    not_found = openai.NotFoundError(
        "no listing", response=httpx.Response(404, request=REQUEST),
        body=None)
    ChatGenerator(chat_config(),
                  FakeChatClient(models_error=not_found)).preflight()
    with pytest.raises(GeneratorConnectivityError):
        ChatGenerator(chat_config(), FakeChatClient(
            models_error=connection_error())).preflight()


@pytest.mark.parametrize("error", [
    rate_limit_error, server_error, bad_request_error, timeout_error,
])
def test_preflight_reports_any_api_error(error):
    with pytest.raises(GeneratorConnectivityError):
        ChatGenerator(chat_config(),
                      FakeChatClient(models_error=error())).preflight()


def test_identity_without_a_client():
    assert chat_config().identity() == "small-chat"
    assert GeneratorConfig().identity() == "mock"
    assert ChatGenerator(chat_config(), FakeChatClient()).identity() == \
        "small-chat"


def test_api_key_from_environment(monkeypatch):
    monkeypatch.setenv("REFINER_TEST_KEY", "secret")
    assert resolve_api_key(chat_config(api_key="",
                                       api_key_env="REFINER_TEST_KEY")) == \
        "secret"
    monkeypatch.delenv("REFINER_TEST_KEY")
    with pytest.raises(ValidationError):
        resolve_api_key(chat_config(api_key="",
                                    api_key_env="REFINER_TEST_KEY"))


def test_chat_config_needs_endpoint():
    with pytest.raises(ValidationError):
        GeneratorConfig(kind="chat_endpoint", model_name="m")
    with pytest.raises(ValidationError):
        GeneratorConfig(kind="carrier-pigeon")


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


def test_token_bucket_waits_for_refill():
    clock = FakeClock()
    bucket = TokenBucket(2.0, capacity=1, clock=clock, sleep=clock.sleep)
    bucket.acquire()
    assert clock.sleeps == []
    bucket.acquire()
    assert clock.sleeps == [pytest.approx(0.5)]


def test_token_bucket_disabled():
    clock = FakeClock()
    bucket = TokenBucket(0, clock=clock, sleep=clock.sleep)
    for _ in range(10):
        bucket.acquire()
    assert clock.sleeps == []
