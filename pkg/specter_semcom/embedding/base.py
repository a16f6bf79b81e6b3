"""Shared embedding types."""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol

import numpy as np

ENDPOINT_ENV = "SEMCOM_EMBED_URL"
NORM_TOLERANCE = 1e-6


class EmbedderBackend(StrEnum):
    HASH = "hash"
    FILE = "file"
    REMOTE = "remote"


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    components: np.ndarray

    def __post_init__(self) -> None:
        components = np.array(self.components, dtype=np.float64).reshape(-1)
        components.flags.writeable = False
        object.__setattr__(self, "components", components)

    @property
    def dim(self) -> int:
        return int(self.components.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    @classmethod
    def normalized(cls, raw) -> EmbeddingVector:
        raw = np.asarray(raw, dtype=np.float64).reshape(-1)
        norm = np.linalg.norm(raw)
        if raw.size < 1 or not np.isfinite(norm) or norm == 0.0:
            raise ValueError("Cannot normalize an empty, zero or non-finite embedding.")
        return cls(raw / norm)


@dataclass(frozen=True)
class EmbedderConfig:
    backend: EmbedderBackend = EmbedderBackend.HASH
    dim: int = 384
    seed: int = 0
    path: str | None = None
    endpoint_url: str | None = None
    timeout_ms: int = 5000
    max_retries: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "backend", EmbedderBackend(self.backend))
        if self.dim < 2:
            raise ValueError(f"Embedding dim must be at least 2, got {self.dim}.")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}.")
        if self.max_retries < 0:
            raise ValueError("max_retries cannot be negative.")
        if self.backend is EmbedderBackend.FILE and not self.path:
            raise ValueError("The file embedder requires a path to an embedding file.")

    def resolved_endpoint(self) -> str:
        url = self.endpoint_url or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ValueError(
                f"The remote embedder needs endpoint_url or the {ENDPOINT_ENV} "
                "environment variable."
            )
        return url


class Embedder(Protocol):
    def embed(self, sentences: list[str]) -> list[EmbeddingVector]: ...
