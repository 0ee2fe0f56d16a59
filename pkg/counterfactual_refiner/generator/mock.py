"""Deterministic offline generator. Each call appends the next phrase of a
script to the previous candidate, so tests and dry runs need no endpoint."""
import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Generation:
    """Text returned by one generator call and how many retries it took"""
    text: str
    retries: int = 0


class MockState:
    """Per-document progress through the script"""
    def __init__(self, script, joiner=" "):
        self.script = tuple(script)
        self.joiner = joiner
        self.iteration = 0
        self.last_candidate = None


def mock_refine(state, doc, prompt):
    """Iteration i returns the previous candidate (the original text at
    first) with phrase i appended; once the script is used up the previous
    candidate comes back unchanged. The prompt is not read."""
    # pylint: disable=unused-argument
    base = state.last_candidate if state.last_candidate is not None \
        else doc.claim
    if state.iteration < len(state.script):
        candidate = base + state.joiner + state.script[state.iteration]
    else:
        candidate = base
    state.iteration += 1
    state.last_candidate = candidate
    return candidate


class MockSession:
    """One document's view of the mock generator"""
    def __init__(self, doc, script, joiner):
        self.doc = doc
        self.state = MockState(script, joiner)

    def generate(self, prompt):
        """Next scripted candidate"""
        return Generation(mock_refine(self.state, self.doc, prompt))


class MockGenerator:
    """Factory of per-document mock sessions. With shuffle_script every
    document gets its own permutation of the script, seeded by the run seed
    and the document id."""
    kind = "mock"

    def __init__(self, config):
        self.script = tuple(config.script)
        self.joiner = config.joiner
        self.shuffle_script = config.shuffle_script
        self.seed = config.seed

    def identity(self):
        """Short description used in reports"""
        return "mock"

    def preflight(self):
        """Nothing to reach"""

    def script_for(self, doc):
        """The phrase order a document sees"""
        if not self.shuffle_script:
            return self.script
        rng = np.random.default_rng(
            [self.seed, zlib.crc32(doc.id.encode("utf-8"))])
        return tuple(self.script[i]
                     for i in rng.permutation(len(self.script)))

    def open_session(self, doc):
        """Fresh state for one document"""
        return MockSession(doc, self.script_for(doc), self.joiner)
