"""Types shared across the refiner, the error hierarchy, and the
serializer used to write resolved run configurations.

The run configuration is written back out in TOML so that a run can be
repeated from its snapshot. This file contains classes to help dealing with
the actual writing of that file.
"""
import json
import math
import collections
from dataclasses import dataclass

import numpy as np


class RefinerError(Exception):
    """Base type for every error raised by the refiner."""


class ValidationError(RefinerError):
    """An error type for explicitly delivering error messages to user.
    Raised for invalid configuration."""


class TemplateError(ValidationError):
    """A prompt template is unreadable or names an unknown placeholder."""


class CorpusError(RefinerError):
    """Input data could not be read or is inconsistent."""


class CorpusParseError(CorpusError):
    """A corpus line is malformed. Carries the 1-based line number."""
    def __init__(self, line_number, message):
        super().__init__("line {}: {}".format(line_number, message))
        self.line_number = line_number


class LabelError(CorpusParseError):
    """A label is outside the known label set."""


class EmptyClaimError(CorpusParseError):
    """The claim (or short text) of a record is empty."""


class DuplicateIdError(CorpusParseError):
    """Two records of one corpus share an id."""


class TrainingError(RefinerError):
    """The discriminator could not be trained."""


class ModelFileError(RefinerError):
    """A model file could not be read back."""


class ModelVersionError(ModelFileError):
    """The model file was written by an unknown format version."""


class ModelChecksumError(ModelFileError):
    """The model file is truncated or corrupted."""


class DiscriminatorError(RefinerError):
    """Scoring through a discriminator failed."""


class RemoteTransportError(DiscriminatorError):
    """Network failure talking to a remote endpoint. Retryable."""
    def __init__(self, endpoint, message):
        super().__init__("{}: {}".format(endpoint, message))
        self.endpoint = endpoint


class MalformedResponseError(DiscriminatorError):
    """A remote endpoint answered with something we can't use."""


class GeneratorError(RefinerError):
    """Base type for generator failures. `retries` counts the retried
    attempts made before giving up."""
    def __init__(self, message, retries=0):
        super().__init__(message)
        self.retries = retries


class GeneratorTransportError(GeneratorError):
    """Transport failure after all retries were spent."""


class GeneratorTimeoutError(GeneratorError):
    """The endpoint did not answer in time."""


class EmptyCompletionError(GeneratorError):
    """The endpoint returned no usable text."""


class GeneratorConnectivityError(GeneratorError):
    """Preflight could not reach the generator endpoint."""


class MetricError(RefinerError):
    """A metric was asked for something it can't compute."""


PROBABILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Verdict:
    """Per-class probability distribution returned by a discriminator"""
    probabilities: tuple
    predicted: int

    @classmethod
    def from_probabilities(cls, probabilities):
        """Build a verdict, checking that the probabilities form a
        distribution. Ties on the maximum go to the lowest index."""
        probs = tuple(float(p) for p in probabilities)
        if len(probs) < 2:
            raise DiscriminatorError(
                "a verdict needs at least two classes, got {}".format(
                    len(probs)))
        if any(p < 0.0 or math.isnan(p) for p in probs):
            raise DiscriminatorError(
                "negative or NaN probability in {}".format(probs))
        if abs(math.fsum(probs) - 1.0) > PROBABILITY_TOLERANCE:
            raise DiscriminatorError(
                "probabilities sum to {!r}, not 1".format(math.fsum(probs)))
        # np.argmax returns the first maximum
        return cls(probs, int(np.argmax(probs)))

    def to_dict(self):
        """Plain form for JSON output"""
        return collections.OrderedDict((
            ("probabilities", list(self.probabilities)),
            ("predicted", self.predicted),
        ))

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        return cls(tuple(float(p) for p in data["probabilities"]),
                   int(data["predicted"]))


class TomlFile:
    """A TOML document made of a header comment and ordered tables.

    Things appended to this file should have the method "to_string()" which
    is used when writing the file
    """
    def __init__(self, comment=""):
        self.comment = comment
        self.tables = []

    def add_table(self, table):
        """Adds a table to this file, tables are written in the order
        they were added"""
        self.tables.append(table)
        return table

    def to_string(self):
        """Serializes the file ready to dump out to disk"""
        sections = []
        if self.comment:
            sections.append(
                "\n".join("# " + line for line in self.comment.splitlines()))
        sections.extend(t.to_string() for t in self.tables)
        return "\n\n".join(s for s in sections if s) + "\n"


class TomlTable(collections.OrderedDict):
    '''Every table of the file looks the same. A heading that looks like
    [name] and contents that is newline separated key = val pairs. This
    TomlTable handles the serialization of one table into this form'''
    def __init__(self, name, values_dict=()):
        self.name = name
        super().__init__(values_dict)

    def generate_heading_string(self):
        """Convert the table name into [name]"""
        return '[{}]'.format(self.name)

    def generate_body_string(self):
        """Convert the contents of the super/internal dict into newline
        separated key = val pairs"""
        lines = []
        for var in self:
            lines.append('{} = {}'.format(key_to_string(var),
                                          to_string(self[var])))
        return "\n".join(lines)

    def to_string(self):
        """Serialize this entire table"""
        body = self.generate_body_string()
        if body:
            return "{}\n{}".format(self.generate_heading_string(), body)
        return self.generate_heading_string()


_BARE_KEY_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")


def key_to_string(key):
    """Bare keys are written as is, anything else gets quoted"""
    key = str(key)
    if key and all(ch in _BARE_KEY_CHARS for ch in key):
        return key
    return string_to_string(key)


def string_to_string(val):
    """TOML basic strings accept the JSON escapes"""
    return json.dumps(val, ensure_ascii=True)


def float_to_string(num):
    """Floats are written with repr so they read back bit-identical"""
    if math.isnan(num) or math.isinf(num):
        raise ValidationError("can't write {!r} to a config file".format(num))
    return repr(float(num))


def list_to_string(values):
    """Arrays are written inline"""
    return "[{}]".format(", ".join(to_string(v) for v in values))


def mapping_to_string(mapping):
    """Nested mappings are written as inline tables"""
    if not mapping:
        return "{}"
    return "{ " + ", ".join(
        "{} = {}".format(key_to_string(k), to_string(v))
        for k, v in mapping.items()) + " }"


def to_string(val):
    """Attempts to convert any object into a string using the conversions
    table, explicit conversion, or falling back to the str() method"""
    if hasattr(val, "to_string"):
        return val.to_string()
    for val_type, converter in CONVERSIONS:
        if isinstance(val, val_type):
            return converter(val)
    return str(val)


# Finds the correct conversion function for a datatype. bool comes before
# int since it subclasses it.
CONVERSIONS = (
    (bool, lambda x: 'true' if x else 'false'),
    (int, str),
    (float, float_to_string),
    (str, string_to_string),
    ((list, tuple), list_to_string),
    (dict, mapping_to_string),
)
