"""Single file container for a trained discriminator.

Layout, all integers little endian:
 - 4 byte magic, u32 format version
 - u32 length + JSON header (label names, tokenizer config)
 - u32 V, u32 K
 - V vocabulary entries in column order, each u32 length + UTF-8 bytes
 - V float64 idf weights, K*V float64 weights (row major), K float64 bias
 - u32 CRC32 of everything before it
"""
import json
import struct
import zlib
import logging

import numpy as np

from ..structures import ModelFileError, ModelVersionError, ModelChecksumError
from .features import TokenizerConfig, Vectorizer
from .linear import DiscriminatorModel

MAGIC = b"CFRM"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_PREAMBLE = struct.Struct("<4sI")


def model_to_bytes(model):
    """Canonical serialization of a model"""
    header = json.dumps({
        "label_names": list(model.label_names),
        "tokenizer": model.vectorizer.config.to_dict(),
    }, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    header = header.encode("utf-8")

    chunks = [_PREAMBLE.pack(MAGIC, FORMAT_VERSION),
              _U32.pack(len(header)), header,
              _U32.pack(model.vectorizer.size),
              _U32.pack(model.num_classes)]
    for feature in model.vectorizer.features():
        encoded = feature.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
    chunks.append(model.vectorizer.idf.astype("<f8").tobytes())
    chunks.append(model.weights.astype("<f8").tobytes(order="C"))
    chunks.append(model.bias.astype("<f8").tobytes())
    body = b"".join(chunks)
    return body + _U32.pack(zlib.crc32(body))


class _Reader:
    """Sequential reader over the checked body"""
    def __init__(self, data, offset):
        self.data = data
        self.offset = offset

    def take(self, size):
        """Next `size` bytes"""
        if self.offset + size > len(self.data):
            raise ModelChecksumError("model file ends early")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self):
        """Next unsigned int"""
        return _U32.unpack(self.take(_U32.size))[0]

    def floats(self, count):
        """Next `count` float64 values"""
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(
            np.float64)


def model_from_bytes(data):
    """Inverse of model_to_bytes"""
    if len(data) < _PREAMBLE.size + _U32.size:
        raise ModelChecksumError("model file is truncated")
    magic, version = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise ModelFileError("not a model file (bad magic {!r})".format(
            magic))
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            "model file format version {} is not supported (expected "
            "{})".format(version, FORMAT_VERSION))
    body, trailer = data[:-_U32.size], data[-_U32.size:]
    if zlib.crc32(body) != _U32.unpack(trailer)[0]:
        raise ModelChecksumError("model file checksum mismatch")

    reader = _Reader(body, _PREAMBLE.size)
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
        n_features = reader.u32()
        n_classes = reader.u32()
        vocabulary = {}
        for index in range(n_features):
            vocabulary[reader.take(reader.u32()).decode("utf-8")] = index
        idf = reader.floats(n_features)
        weights = reader.floats(n_classes * n_features).reshape(
            n_classes, n_features)
        bias = reader.floats(n_classes)
        tokenizer = TokenizerConfig(**header["tokenizer"])
        label_names = header["label_names"]
    except (ValueError, KeyError, TypeError) as error:
        raise ModelFileError("model file is corrupt: {}".format(
            error)) from None
    if reader.offset != len(body):
        raise ModelFileError("model file has trailing data")
    return DiscriminatorModel(Vectorizer(vocabulary, idf, tokenizer),
                              weights, bias, label_names)


def save_model(model, path):
    """Write a model to disk"""
    with open(path, "wb") as out_file:
        out_file.write(model_to_bytes(model))
    logging.info("Saved model to %s", path)


def load_model(path):
    """Read a model written by save_model"""
    try:
        with open(path, "rb") as in_file:
            data = in_file.read()
    except OSError as error:
        raise ModelFileError("can't read model {}: {}".format(
            path, error.strerror or error)) from None
    model = model_from_bytes(data)
    logging.info("Loaded model from %s (%d features, %d classes)",
                 path, model.vectorizer.size, model.num_classes)
    return model
