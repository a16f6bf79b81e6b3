"""Deterministic bag-of-tokens embedder for tests and offline runs."""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

from .base import EmbeddingVector

_SEED_MASK = (1 << 64) - 1


@lru_cache(maxsize=4096)
def _token_direction(token: str, seed: int, dim: int) -> np.ndarray:
    key = (seed & _SEED_MASK).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode(), digest_size=8, key=key).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    direction.flags.writeable = False
    return direction


class HashEmbedder:
    """Each whitespace token hashes to a random unit direction; a sentence is
    the normalized sum of its token directions. Word order is ignored."""

    def __init__(self, dim: int = 384, seed: int = 0) -> None:
        self.dim = dim
        self.seed = seed

    def embed_one(self, sentence: str) -> EmbeddingVector:
        tokens = sentence.split()
        if not tokens:
            raise ValueError("Cannot embed an empty sentence.")
        total = np.zeros(self.dim)
        for token in sorted(tokens):
            total += _token_direction(token, self.seed, self.dim)
        return EmbeddingVector.normalized(total)

    def embed(self, sentences: list[str]) -> list[EmbeddingVector]:
        return [self.embed_one(sentence) for sentence in sentences]
