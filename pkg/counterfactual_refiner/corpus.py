"""Reading labeled corpora from JSON-lines files.

Two record layouts are understood:
 - findr: financial dispute records with a claim, the rebuttal, the
   judgment and one of six raw judgment labels, remapped to a binary
   reasonable/unreasonable label
 - short_text: benchmark records with a text and an integer class index,
   the class names come from a header line or from the config
"""
import enum
import json
import math
import logging
import collections
from dataclasses import dataclass, field

import numpy as np

from .structures import (
    CorpusError, CorpusParseError, LabelError, EmptyClaimError,
    DuplicateIdError, ValidationError
)

FINDR = "findr"
SHORT_TEXT = "short_text"
SCHEMAS = (FINDR, SHORT_TEXT)

TEXT_FIELDS = ("claim", "rebuttal", "judgment")

DEFAULT_RATIOS = (0.8, 0.1, 0.1)


class RawLabel(enum.Enum):
    """The six judgment outcomes a dispute record can carry"""
    REASONABLE = "reasonable"
    UNREASONABLE = "unreasonable"
    SOME_REASONABLE = "some_reasonable"
    SOME_UNREASONABLE = "some_unreasonable"
    SOME_NOT_APPLICABLE = "some_not_applicable"
    OTHER = "other"

    def surface_form(self):
        """The spaced form used when writing records back out"""
        return self.value.replace("_", " ")


class BinaryLabel(enum.Enum):
    """Remapped label; the value is the class index"""
    UNREASONABLE = 0
    REASONABLE = 1


FINDR_LABEL_NAMES = ("unreasonable", "reasonable")


def remap_label(raw):
    """Only fully or partly reasonable claims count as reasonable"""
    if raw in (RawLabel.REASONABLE, RawLabel.SOME_REASONABLE):
        return BinaryLabel.REASONABLE
    return BinaryLabel.UNREASONABLE


def parse_raw_label(text, aliases=None):
    """Accepts the canonical snake form, the spaced form ("some
    reasonable") and anything listed in the alias table. Everything else is
    an error."""
    if not isinstance(text, str):
        raise ValueError("label must be a string, got {!r}".format(text))
    stripped = text.strip()
    if aliases and stripped in aliases:
        stripped = aliases[stripped]
    key = stripped.lower().replace("-", "_").replace(" ", "_")
    try:
        return RawLabel(key)
    except ValueError:
        raise ValueError("unknown raw label {!r}".format(text)) from None


@dataclass(frozen=True)
class Record:
    """One labeled document. For short-text corpora the text lives in
    `claim` and raw_label is None."""
    id: str
    claim: str
    label: int
    rebuttal: str = ""
    judgment: str = ""
    raw_label: RawLabel = None

    @property
    def binary_label(self):
        """The remapped label of a dispute record"""
        if self.raw_label is None:
            return None
        return remap_label(self.raw_label)

    def text_for(self, fields=("claim",), claim=None):
        """Join the selected fields into the text a classifier sees.
        `claim` replaces the record's own claim, which is how rewritten
        candidates are scored in context."""
        parts = []
        for name in fields:
            value = claim if (name == "claim" and claim is not None) \
                else getattr(self, name)
            if value:
                parts.append(value)
        return "\n".join(parts)


@dataclass(frozen=True)
class Corpus:
    """An immutable, ordered collection of records"""
    records: tuple
    label_names: tuple
    schema: str
    _ids: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise CorpusError("record ids are not unique")
        for rec in self.records:
            if not 0 <= rec.label < len(self.label_names):
                raise CorpusError("record {} has class {} but only {} "
                                  "labels exist".format(
                                      rec.id, rec.label,
                                      len(self.label_names)))
        object.__setattr__(self, "_ids", frozenset(ids))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __contains__(self, doc_id):
        return doc_id in self._ids

    def subset(self, records):
        """A corpus over some of these records, same labels and schema"""
        return Corpus(tuple(records), self.label_names, self.schema)


def _require_str(obj, key, line_number, required=True):
    if required and key not in obj:
        raise CorpusParseError(
            line_number, "missing field {!r}".format(key))
    value = obj.get(key)
    if value is None:
        return ""
    if not isinstance(value, str):
        raise CorpusParseError(
            line_number, "field {!r} must be a string".format(key))
    return value


def _parse_id(obj, line_number):
    if "id" not in obj:
        raise CorpusParseError(line_number, "missing field 'id'")
    doc_id = obj["id"]
    if isinstance(doc_id, bool) or not isinstance(doc_id, (str, int)):
        raise CorpusParseError(line_number, "id must be a string")
    return str(doc_id)


def parse_record(line, schema, line_number=1, label_names=None,
                 aliases=None):
    """Parse one JSON-lines object into a Record"""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as error:
        raise CorpusParseError(line_number, "malformed JSON ({})".format(
            error.msg)) from None
    if not isinstance(obj, dict):
        raise CorpusParseError(line_number, "expected a JSON object")

    doc_id = _parse_id(obj, line_number)

    if schema == FINDR:
        claim = _require_str(obj, "claim", line_number)
        if not claim.strip():
            raise EmptyClaimError(line_number, "empty claim")
        if "raw_label" not in obj:
            raise CorpusParseError(line_number, "missing field 'raw_label'")
        try:
            raw = parse_raw_label(obj["raw_label"], aliases)
        except ValueError as error:
            raise LabelError(line_number, str(error)) from None
        return Record(
            id=doc_id,
            claim=claim,
            label=remap_label(raw).value,
            rebuttal=_require_str(obj, "rebuttal", line_number, False),
            judgment=_require_str(obj, "judgment", line_number, False),
            raw_label=raw,
        )

    if schema == SHORT_TEXT:
        text = _require_str(obj, "text", line_number)
        if not text.strip():
            raise EmptyClaimError(line_number, "empty text")
        label = obj.get("label")
        if isinstance(label, bool) or not isinstance(label, int):
            raise LabelError(line_number,
                             "label must be an integer class index")
        if label_names is not None and not 0 <= label < len(label_names):
            raise LabelError(line_number, "class index {} outside {} "
                             "label names".format(label, len(label_names)))
        return Record(id=doc_id, claim=text, label=label)

    raise ValidationError("unknown corpus schema {!r}".format(schema))


def _header_label_names(line):
    """Returns the label names of a short-text header line, or None when
    the line is an ordinary record"""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    if isinstance(obj, dict) and set(obj) == {"label_names"}:
        return tuple(str(name) for name in obj["label_names"])
    return None


def load_corpus(path, schema, label_names=None, aliases=None,
                fold_other=False):
    """Read a whole corpus file. Records keep their file order, the first
    bad line aborts the load."""
    if schema not in SCHEMAS:
        raise ValidationError("unknown corpus schema {!r}".format(schema))
    try:
        with open(path, "r", encoding="utf-8") as corpus_file:
            lines = corpus_file.read().splitlines()
    except OSError as error:
        raise CorpusError("can't read corpus {}: {}".format(
            path, error.strerror or error)) from None

    if schema == FINDR:
        label_names = FINDR_LABEL_NAMES
    elif lines and _header_label_names(lines[0]) is not None:
        label_names = _header_label_names(lines[0])
        lines[0] = ""
    if label_names is None:
        raise ValidationError(
            "short_text corpus {} has no label_names header and none are "
            "configured".format(path))
    label_names = tuple(label_names)

    records = []
    seen = set()
    dropped_other = 0
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = parse_record(line, schema, line_number, label_names,
                              aliases)
        if record.id in seen:
            raise DuplicateIdError(
                line_number, "duplicate id {!r}".format(record.id))
        seen.add(record.id)
        if record.raw_label is RawLabel.OTHER and not fold_other:
            dropped_other += 1
            continue
        records.append(record)

    if dropped_other:
        logging.warning("Dropped %d records labeled 'other' from %s",
                        dropped_other, path)
    logging.info("Loaded %d records from %s", len(records), path)
    return Corpus(tuple(records), label_names, schema)


def record_to_dict(record, schema):
    """Plain form of a record with the fixed key order of its schema"""
    if schema == FINDR:
        return collections.OrderedDict((
            ("id", record.id),
            ("claim", record.claim),
            ("rebuttal", record.rebuttal),
            ("judgment", record.judgment),
            ("raw_label", record.raw_label.surface_form()),
        ))
    return collections.OrderedDict((
        ("id", record.id),
        ("text", record.claim),
        ("label", record.label),
    ))


def dump_corpus(corpus, path):
    """Write a corpus back out in the format load_corpus reads"""
    with open(path, "w", encoding="utf-8") as out_file:
        if corpus.schema == SHORT_TEXT:
            out_file.write(json.dumps(
                {"label_names": list(corpus.label_names)},
                ensure_ascii=False) + "\n")
        for record in corpus:
            out_file.write(json.dumps(record_to_dict(record, corpus.schema),
                                      ensure_ascii=False) + "\n")


def split_sizes(total, ratios):
    """floor, floor, then the remainder goes to the last part"""
    # the epsilon absorbs representation error such as 0.29 * 100
    n_train = int(math.floor(ratios[0] * total + 1e-9))
    n_val = int(math.floor(ratios[1] * total + 1e-9))
    n_val = min(n_val, total - n_train)
    return n_train, n_val, total - n_train - n_val


def check_ratios(ratios):
    """Three non-negative fractions that sum to one"""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ValidationError(
            "split ratios need three values, got {}".format(len(ratios)))
    if any(r < 0 for r in ratios):
        raise ValidationError("split ratios must be >= 0: {}".format(ratios))
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise ValidationError(
            "split ratios must sum to 1, got {!r}".format(math.fsum(ratios)))
    return ratios


def split_corpus(corpus, ratios=DEFAULT_RATIOS, seed=0):
    """Seeded shuffle, then cut into train, validation and test"""
    ratios = check_ratios(ratios)
    order = np.random.default_rng(seed).permutation(len(corpus))
    shuffled = [corpus.records[i] for i in order]
    n_train, n_val, _ = split_sizes(len(shuffled), ratios)
    return (corpus.subset(shuffled[:n_train]),
            corpus.subset(shuffled[n_train:n_train + n_val]),
            corpus.subset(shuffled[n_train + n_val:]))


@dataclass(frozen=True)
class CorpusStats:
    """Size and length statistics of a corpus"""
    samples: int
    avg_chars: float
    avg_words: float
    label_counts: tuple

    def to_string(self):
        """Human readable summary"""
        lines = [
            "samples    {}".format(self.samples),
            "avg chars  {:.1f}".format(self.avg_chars),
            "avg words  {:.1f}".format(self.avg_words),
        ]
        for name, count in self.label_counts:
            lines.append("  {:<24} {}".format(name, count))
        return "\n".join(lines)


def corpus_stats(corpus):
    """Counts per label and mean claim length in characters and in
    whitespace separated words"""
    counts = collections.Counter(r.label for r in corpus)
    n_docs = len(corpus)
    if n_docs:
        avg_chars = sum(len(r.claim) for r in corpus) / n_docs
        avg_words = sum(len(r.claim.split()) for r in corpus) / n_docs
    else:
        avg_chars = avg_words = 0.0
    return CorpusStats(
        samples=n_docs,
        avg_chars=avg_chars,
        avg_words=avg_words,
        label_counts=tuple((name, counts.get(i, 0))
                           for i, name in enumerate(corpus.label_names)),
    )
