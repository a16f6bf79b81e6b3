from .base import (
    ENDPOINT_ENV,
    Embedder,
    EmbedderBackend,
    EmbedderConfig,
    EmbeddingVector,
)
from .file_embedder import FileEmbedder, read_embedding_file, write_embedding_file
from .hash_embedder import HashEmbedder
from .remote_client import RemoteEmbedder


def make_embedder(config: EmbedderConfig) -> Embedder:
    if config.backend is EmbedderBackend.HASH:
        return HashEmbedder(config.dim, config.seed)
    if config.backend is EmbedderBackend.FILE:
        return FileEmbedder(config.path)
    return RemoteEmbedder(
        config.resolved_endpoint(),
        timeout_ms=config.timeout_ms,
        max_retries=config.max_retries,
    )


def embed(config: EmbedderConfig, sentences: list[str]) -> list[EmbeddingVector]:
    """Embed ``sentences`` with the configured backend; output aligns by index."""
    if any(not isinstance(s, str) or not s.strip() for s in sentences):
        raise ValueError("Sentences must be non-empty strings.")
    return make_embedder(config).embed(list(sentences))


__all__ = [
    "ENDPOINT_ENV",
    "Embedder",
    "EmbedderBackend",
    "EmbedderConfig",
    "EmbeddingVector",
    "FileEmbedder",
    "HashEmbedder",
    "RemoteEmbedder",
    "embed",
    "make_embedder",
    "read_embedding_file",
    "write_embedding_file",
]
