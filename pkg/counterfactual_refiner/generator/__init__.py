"""
Generators rewrite a document from a prompt. Every generator offers:
 - open_session(doc), the object the engine calls for that document; the
   mock keeps its per-document state there
 - preflight(), raising GeneratorConnectivityError when unusable
 - identity() for reports

A session has generate(prompt) returning a Generation (text, retries).
"""
from dataclasses import dataclass

from ..structures import ValidationError
from .mock import Generation, MockState, MockGenerator, mock_refine
from .chat import ChatGenerator, TokenBucket, strip_fences
from .prompts import (
    PromptBundle, PromptTemplates, FeedbackCue, TaskDescriptor,
    build_initial_prompt, build_feedback_prompt, REINFORCEMENT, REJECTION
)

MOCK = "mock"
CHAT_ENDPOINT = "chat_endpoint"


@dataclass(frozen=True)
class GeneratorConfig:
    """Settings for either generator kind. The script fields only matter
    for the mock, the endpoint fields only for chat_endpoint."""
    kind: str = MOCK
    endpoint_url: str = ""
    model_name: str = ""
    temperature: float = 0.7
    max_output_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    seed: int = 0
    api_key_env: str = "OPENAI_API_KEY"
    api_key: str = ""
    backoff_base: float = 1.0
    backoff_jitter: float = 1.0
    concurrency: int = 4
    rate_per_second: float = 0.0
    script: tuple = ()
    joiner: str = " "
    shuffle_script: bool = False

    def __post_init__(self):
        if self.kind not in GENERATOR_KIND_TO_FACTORY:
            raise ValidationError(
                "unknown generator kind {!r}".format(self.kind))
        if self.kind == CHAT_ENDPOINT and not (self.endpoint_url and
                                               self.model_name):
            raise ValidationError(
                "chat_endpoint generator needs endpoint_url and model_name")
        if self.max_retries < 0 or self.concurrency < 1:
            raise ValidationError(
                "max_retries must be >= 0 and concurrency >= 1")

    def identity(self):
        """Name reports carry for this generator, known without a client"""
        return self.model_name if self.kind == CHAT_ENDPOINT else MOCK


GENERATOR_KIND_TO_FACTORY = {
    MOCK: MockGenerator,
    CHAT_ENDPOINT: ChatGenerator,
}


def build_generator(config):
    """Generator for a config"""
    return GENERATOR_KIND_TO_FACTORY[config.kind](config)


def generate(session, prompt):
    """Candidate text for a prompt"""
    return session.generate(prompt).text
