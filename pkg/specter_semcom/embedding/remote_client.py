"""Client for a remote sentence-embedding service.

Protocol: ``POST {"texts": [...]}`` returning ``{"vectors": [[...], ...]}``
aligned with the request.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor

import urllib3
from urllib3.util import Retry

from ..errors import EmbeddingTimeout, ServiceError
from .base import EmbeddingVector

logger = logging.getLogger(__name__)

http = urllib3.PoolManager()

# Statuses worth another attempt; anything else non-200 fails immediately.
RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})
BACKOFF_FACTOR = 0.25


def retry_policy(max_retries: int) -> Retry:
    """Exponential back-off on transient statuses and connection errors."""
    return Retry(
        total=max_retries,
        status_forcelist=RETRY_STATUSES,
        allowed_methods=frozenset({"POST"}),
        backoff_factor=BACKOFF_FACTOR,
        raise_on_status=False,
    )


class RemoteEmbedder:
    def __init__(
        self,
        endpoint_url: str,
        *,
        timeout_ms: int = 5000,
        max_retries: int = 2,
        batch_size: int = 64,
        max_in_flight: int = 4,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.timeout = urllib3.Timeout(total=timeout_ms / 1000)
        self.retries = retry_policy(max_retries)
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight

    def _post(self, texts: list[str]) -> list[list[float]]:
        try:
            resp = http.request(
                "POST",
                self.endpoint_url,
                headers={"Content-Type": "application/json"},
                body=json.dumps({"texts": texts}),
                timeout=self.timeout,
                retries=self.retries,
            )
        except urllib3.exceptions.MaxRetryError as e:
            if isinstance(e.reason, urllib3.exceptions.TimeoutError):
                raise EmbeddingTimeout(f"embedding request timed out: {e.reason}") from e
            raise ServiceError(0, str(e.reason)) from e
        except urllib3.exceptions.TimeoutError as e:
            raise EmbeddingTimeout(f"embedding request timed out: {e}") from e
        except urllib3.exceptions.HTTPError as e:
            raise ServiceError(0, str(e)) from e
        if resp.status != 200:
            excerpt = resp.data[:200].decode(errors="replace")
            logger.warning(
                "Embedding request to %s failed with HTTP %d", self.endpoint_url, resp.status
            )
            raise ServiceError(resp.status, excerpt)
        return self._parse(resp.data, len(texts))

    @staticmethod
    def _parse(data: bytes, expected: int) -> list[list[float]]:
        try:
            vectors = json.loads(data.decode())["vectors"]
        except (ValueError, KeyError, TypeError) as e:
            raise ServiceError(200, f"malformed response: {e}") from e
        if not isinstance(vectors, list) or len(vectors) != expected:
            raise ServiceError(200, f"expected {expected} vectors in response")
        return vectors

    def embed(self, sentences: list[str]) -> list[EmbeddingVector]:
        batches = [
            sentences[i : i + self.batch_size] for i in range(0, len(sentences), self.batch_size)
        ]
        if len(batches) <= 1:
            results = [self._post(batch) for batch in batches]
        else:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._post, batches))
        vectors = [EmbeddingVector.normalized(v) for batch in results for v in batch]
        dims = {v.dim for v in vectors}
        if len(dims) > 1:
            raise ServiceError(200, f"inconsistent vector dimensions {sorted(dims)}")
        return vectors
