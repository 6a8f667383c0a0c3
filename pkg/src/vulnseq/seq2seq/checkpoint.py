"""Versioned binary checkpoints with an integrity digest.

Layout: magic, format version, canonical-JSON config, vocabulary table,
parameter tensors as little-endian float64 in declared order, and a
trailing sha256 over everything before it. A bad digest or truncation is
corruption; a digest-valid file whose config, vocabulary, and tensor
shapes disagree is a version problem.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct

import numpy as np

from ..errors import CorruptCheckpoint, VersionError
from ..fileio import atomic_write_bytes
from .model import ModelConfig, Seq2SeqModel, parameter_shapes
from .vocab import RESERVED_TOKENS, Vocabulary

MAGIC = b"VSQM"
FORMAT_VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint("unexpected end of checkpoint")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_model(model: Seq2SeqModel, path: str) -> None:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    config_json = json.dumps(
        dataclasses.asdict(model.config), sort_keys=True, separators=(",", ":")
    )
    chunks.append(_pack_str(config_json))
    vocab = model.vocabulary.index_to_token
    chunks.append(struct.pack("<I", len(vocab)))
    chunks.extend(_pack_str(t) for t in vocab)
    names = list(parameter_shapes(model.config, model.vocabulary.size()))
    chunks.append(struct.pack("<I", len(names)))
    for name in names:
        tensor = np.ascontiguousarray(model.params[name], dtype="<f8")
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<I", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(tensor.tobytes())
    body = b"".join(chunks)
    atomic_write_bytes(path, body + hashlib.sha256(body).digest())


def load_model(path: str) -> Seq2SeqModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 + 32:
        raise CorruptCheckpoint("checkpoint too short")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpoint("digest mismatch")
    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported checkpoint format version {version}")
    config_fields = json.loads(r.string())
    known = {f.name for f in dataclasses.fields(ModelConfig)}
    if set(config_fields) != known:
        raise VersionError("checkpoint config schema does not match")
    config = ModelConfig(**config_fields)
    n_tokens = r.u32()
    tokens = tuple(r.string() for _ in range(n_tokens))
    if tokens[: len(RESERVED_TOKENS)] != RESERVED_TOKENS:
        raise VersionError("vocabulary reserved entries do not match")
    vocabulary = Vocabulary(tokens, {t: i for i, t in enumerate(tokens)})
    n_params = r.u32()
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        name = r.string()
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(r.take(8 * count), dtype="<f8")
        params[name] = data.reshape(shape).astype(np.float64)
    if r.pos != len(body):
        raise CorruptCheckpoint("trailing bytes after parameters")
    expected = parameter_shapes(config, vocabulary.size())
    if set(params) != set(expected):
        raise VersionError("parameter set does not match the stored config")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise VersionError(
                f"{name}: stored shape {params[name].shape} does not match "
                f"config shape {shape}"
            )
        if not np.isfinite(params[name]).all():
            raise CorruptCheckpoint(f"{name} contains non-finite values")
    return Seq2SeqModel(config, vocabulary, params)
