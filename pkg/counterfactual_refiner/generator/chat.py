"""Generator backed by any OpenAI-compatible chat-completions endpoint."""
import os
import re
import time
import logging
import threading

import openai
from tenacity import (
    Retrying, RetryError, retry_if_exception_type, stop_after_attempt,
    wait_exponential_jitter
)

from ..structures import (
    ValidationError, GeneratorError, GeneratorTransportError,
    GeneratorTimeoutError, EmptyCompletionError, GeneratorConnectivityError
)
from .mock import Generation

_FENCE_RE = re.compile(r"^```[^\n]*\n(.*?)\n?```$", re.DOTALL)


def strip_fences(text):
    """Unwrap a reply that came back inside a ``` block"""
    text = text.strip()
    match = _FENCE_RE.match(text)
    if match:
        return match.group(1).strip()
    return text


class TokenBucket:
    """Blocking rate limiter. rate tokens per second refill a bucket of
    `capacity`; a rate of 0 disables limiting."""
    def __init__(self, rate, capacity=1, clock=time.monotonic,
                 sleep=time.sleep):
        self.rate = float(rate)
        self.capacity = max(1.0, float(capacity))
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self.lock = threading.Lock()

    def acquire(self):
        """Take one token, waiting for it if necessary"""
        if self.rate <= 0:
            return
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity,
                                  self.tokens + (now - self.updated) *
                                  self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


class _Retryable(Exception):
    """Wraps an endpoint error worth another attempt"""
    def __init__(self, error, timed_out=False):
        super().__init__(str(error))
        self.error = error
        self.timed_out = timed_out


def resolve_api_key(config):
    """Explicit key first, then the environment variable named in the
    config"""
    if config.api_key:
        return config.api_key
    key = os.environ.get(config.api_key_env or "")
    if not key:
        raise ValidationError(
            "no API key: set {} or generator.api_key".format(
                config.api_key_env))
    return key


class ChatGenerator:
    """Sends prompts to the endpoint with retries, a concurrency cap and a
    token-bucket rate limit shared by every caller. Holds no per-document
    state, so it is its own session."""
    kind = "chat_endpoint"

    def __init__(self, config, client=None):
        self.config = config
        if client is None:
            client = openai.OpenAI(
                base_url=config.endpoint_url,
                api_key=resolve_api_key(config),
                timeout=config.timeout,
                max_retries=0,
            )
        self.client = client
        self._slots = threading.BoundedSemaphore(config.concurrency)
        self._bucket = TokenBucket(config.rate_per_second,
                                   config.concurrency)

    def identity(self):
        """Short description used in reports"""
        return self.config.identity()

    def preflight(self):
        """Make sure the endpoint answers before any document is processed"""
        try:
            self.client.models.list()
        except openai.NotFoundError:
            # reachable, just no model listing
            pass
        except openai.APIError as error:
            raise GeneratorConnectivityError(
                "generator endpoint {} is not usable: {}".format(
                    self.config.endpoint_url, error)) from None
        logging.info("Generator endpoint %s is reachable",
                     self.config.endpoint_url)

    def open_session(self, doc):
        """Stateless, every document shares the generator"""
        # pylint: disable=unused-argument
        return self

    def _complete(self, prompt):
        try:
            with self._slots:
                self._bucket.acquire()
                response = self.client.chat.completions.create(
                    model=self.config.model_name,
                    messages=prompt.messages(),
                    temperature=self.config.temperature,
                    max_tokens=self.config.max_output_tokens,
                )
        except openai.APITimeoutError as error:
            raise _Retryable(error, timed_out=True) from None
        except (openai.APIConnectionError, openai.RateLimitError,
                openai.InternalServerError) as error:
            raise _Retryable(error) from None
        except openai.APIError as error:
            raise GeneratorError("generator endpoint rejected the request: "
                                 "{}".format(error)) from None
        return response

    def generate(self, prompt):
        """Assistant reply for the prompt, fences stripped. Retries with
        exponential backoff (factor 2, jitter) on transport errors, rate
        limits and timeouts."""
        retrying = Retrying(
            retry=retry_if_exception_type(_Retryable),
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential_jitter(
                initial=self.config.backoff_base, exp_base=2,
                jitter=self.config.backoff_jitter),
        )
        retries = 0
        try:
            for attempt in retrying:
                with attempt:
                    retries = attempt.retry_state.attempt_number - 1
                    if retries:
                        logging.info("Retrying generator call (%d/%d)",
                                     retries, self.config.max_retries)
                    response = self._complete(prompt)
        except RetryError as error:
            last = error.last_attempt.exception()
            if last.timed_out:
                raise GeneratorTimeoutError(
                    "generator timed out after {} retries".format(retries),
                    retries) from None
            raise GeneratorTransportError(
                "generator failed after {} retries: {}".format(
                    retries, last), retries) from None

        try:
            content = response.choices[0].message.content
        except (AttributeError, IndexError):
            content = None
        text = strip_fences(content or "")
        if not text:
            raise EmptyCompletionError("generator returned an empty "
                                       "completion", retries)
        return Generation(text, retries)
