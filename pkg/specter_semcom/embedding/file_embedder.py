"""Lookup embedder over precomputed sentence vectors.

File layout (little-endian): magic ``SEMB``, u32 version, u32 dim, then
records of u32 byte length, UTF-8 sentence, ``dim`` float32 components.
"""

from __future__ import annotations

import logging
import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from ..errors import FormatError, MissingEmbedding
from .base import EmbeddingVector

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"SEMB"
EMBEDDING_VERSION = 1


def write_embedding_file(path: str | Path, table: Mapping[str, object]) -> None:
    vectors = {sentence: np.asarray(v, dtype="<f4").reshape(-1) for sentence, v in table.items()}
    dims = {v.size for v in vectors.values()}
    if len(dims) != 1:
        raise ValueError(f"All embeddings must share one dimension, got {sorted(dims)}.")
    (dim,) = dims
    out = [EMBEDDING_MAGIC, struct.pack("<II", EMBEDDING_VERSION, dim)]
    for sentence in sorted(vectors):
        raw = sentence.encode()
        out += [struct.pack("<I", len(raw)), raw, vectors[sentence].tobytes()]
    Path(path).write_bytes(b"".join(out))


def read_embedding_file(path: str | Path) -> dict[str, EmbeddingVector]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != EMBEDDING_MAGIC:
        raise FormatError(f"{path} is not an embedding file (bad magic)")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != EMBEDDING_VERSION:
        raise FormatError(f"unsupported embedding file version {version}")
    table: dict[str, EmbeddingVector] = {}
    pos = 12
    while pos < len(data):
        if pos + 4 > len(data):
            raise FormatError(f"embedding file truncated at byte {pos}")
        (length,) = struct.unpack_from("<I", data, pos)
        end = pos + 4 + length + 4 * dim
        if end > len(data):
            raise FormatError(f"embedding file truncated at byte {pos}")
        sentence = data[pos + 4 : pos + 4 + length].decode()
        components = np.frombuffer(data, dtype="<f4", count=dim, offset=pos + 4 + length)
        table[sentence] = EmbeddingVector.normalized(components)
        pos = end
    logger.info("Loaded %d embeddings (dim %d) from %s", len(table), dim, path)
    return table


class FileEmbedder:
    def __init__(self, path: str | Path) -> None:
        self.table = read_embedding_file(path)

    def embed(self, sentences: list[str]) -> list[EmbeddingVector]:
        out = []
        for sentence in sentences:
            if sentence not in self.table:
                raise MissingEmbedding(sentence)
            out.append(self.table[sentence])
        return out
