"""Exception hierarchy shared by every module."""


class SemcomError(Exception):
    """Base class for all errors raised by specter_semcom."""


# --- corpus ingestion --------------------------------------------------------


class ParseError(SemcomError):
    """The annotation document is not well-formed JSON."""


class SchemaError(SemcomError):
    """A required field is missing or has the wrong type."""


class ValidationError(SemcomError):
    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid scene")


class FormatError(SemcomError):
    """A binary file has the wrong magic, version or is truncated."""


# --- embeddings --------------------------------------------------------------


class MissingEmbedding(SemcomError):
    def __init__(self, sentence: str) -> None:
        self.sentence = sentence
        super().__init__(f"no embedding for sentence {sentence!r}")


class ServiceError(SemcomError):
    def __init__(self, status: int, body: str) -> None:
        self.status = status
        self.body = body[:200]
        super().__init__(f"embedding service returned HTTP {status}: {self.body}")


class EmbeddingTimeout(SemcomError):
    """The remote embedding service did not answer in time."""


# --- selection and source coding ---------------------------------------------


class MissingFilteredGraph(SemcomError):
    """A filtered semantic kind was requested without a filtered graph."""


class SelectionError(SemcomError):
    """An invalid combination of semantic kinds or policy entry."""


class CodecError(SemcomError):
    """A semantic kind cannot be encoded with the given inputs."""


class MalformedPayload(CodecError):
    """A payload does not decode under the requested kind."""


class ClassIdOverflow(CodecError):
    """A segmentation class id does not fit the configured cell width."""


# --- physical layer ----------------------------------------------------------


class LengthMismatch(SemcomError):
    """A bit vector has the wrong length for the code."""


class BaseGraphError(SemcomError):
    """The base-graph descriptor does not have the expected structure."""


# --- performance model -------------------------------------------------------


class InvalidGrant(SemcomError):
    """A resource grant has a zero or negative field."""


class MissingTableEntry(SemcomError):
    """A BLER table has no entry for a requested (block size, rate, SNR)."""


class ProfileError(SemcomError):
    """A latency profile file is malformed or incomplete."""
