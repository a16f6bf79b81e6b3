"""Task-adaptive choice of which semantics to send, and payload assembly."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from pathlib import Path

from .errors import MissingFilteredGraph, SelectionError
from .semantic_model import SceneAnnotation, SceneGraph, SemanticKind, SemanticPayload
from .source_codec import CodecConfig, encode_section, pack_payload

logger = logging.getLogger(__name__)


class TaskKind(Enum):
    CLASSIFICATION = "classification"
    LOCALIZATION = "localization"
    DETECTION = "detection"
    RETRIEVAL = "retrieval"
    GENERATION = "generation"


@total_ordering
class FidelityLevel(Enum):
    MINIMAL = "minimal"
    STANDARD = "standard"
    RICH = "rich"
    FULL = "full"

    @property
    def rank(self) -> int:
        return list(FidelityLevel).index(self)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, FidelityLevel):
            return NotImplemented
        return self.rank < other.rank


_FILTERED_BY_DEFAULT = frozenset(
    {SemanticKind.SCENE_GRAPH_FILTERED, SemanticKind.SCENE_GRAPH_LAYOUTS}
)


@dataclass(frozen=True)
class SemanticSelection:
    kind: SemanticKind
    filtered: bool = False

    def __post_init__(self) -> None:
        if self.kind is SemanticKind.SCENE_GRAPH_FILTERED and not self.filtered:
            raise SelectionError("sg_filtered is always built from the filtered graph")
        if self.filtered and self.kind not in _FILTERED_BY_DEFAULT:
            raise SelectionError(f"{self.kind} has no filtered variant")

    @classmethod
    def of(cls, item: SemanticSelection | SemanticKind) -> SemanticSelection:
        if isinstance(item, SemanticSelection):
            return item
        return cls(item, item in _FILTERED_BY_DEFAULT)

    @property
    def token(self) -> str:
        if self.kind is SemanticKind.SCENE_GRAPH_LAYOUTS and not self.filtered:
            return "sg_layouts_full"
        return self.kind.value


def parse_selection(token: str) -> SemanticSelection:
    """Kind name as written in policy files and on the command line."""
    token = token.strip().lower()
    if token == "sg_layouts_full":
        return SemanticSelection(SemanticKind.SCENE_GRAPH_LAYOUTS, filtered=False)
    try:
        return SemanticSelection.of(SemanticKind(token))
    except ValueError as e:
        raise SelectionError(f"unknown semantic kind {token!r}") from e


def _sel(kind: SemanticKind, filtered: bool | None = None) -> SemanticSelection:
    if filtered is None:
        return SemanticSelection.of(kind)
    return SemanticSelection(kind, filtered)


Policy = Mapping[tuple[TaskKind, FidelityLevel], tuple[SemanticSelection, ...]]


def default_policy(*, unfiltered_rich_generation: bool = False) -> dict:
    T, F, K = TaskKind, FidelityLevel, SemanticKind
    policy: dict[tuple[TaskKind, FidelityLevel], tuple[SemanticSelection, ...]] = {}
    for fidelity in F:
        policy[(T.CLASSIFICATION, fidelity)] = (_sel(K.OBJECTS),)
        policy[(T.LOCALIZATION, fidelity)] = (_sel(K.LAYOUTS),)
        detection = K.OBJECTS_LAYOUTS if fidelity <= F.STANDARD else K.SEGMAP
        policy[(T.DETECTION, fidelity)] = (_sel(detection),)
    policy[(T.RETRIEVAL, F.MINIMAL)] = (_sel(K.OBJECTS),)
    policy[(T.RETRIEVAL, F.STANDARD)] = (_sel(K.OBJECTS_LAYOUTS),)
    policy[(T.RETRIEVAL, F.RICH)] = (_sel(K.SCENE_GRAPH_LAYOUTS, True),)
    policy[(T.RETRIEVAL, F.FULL)] = (_sel(K.FEATURE_MAP),)
    policy[(T.GENERATION, F.MINIMAL)] = (_sel(K.SCENE_GRAPH_FILTERED),)
    policy[(T.GENERATION, F.STANDARD)] = (_sel(K.SCENE_GRAPH_LAYOUTS, True),)
    policy[(T.GENERATION, F.RICH)] = (
        _sel(K.SCENE_GRAPH_LAYOUTS, not unfiltered_rich_generation),
    )
    policy[(T.GENERATION, F.FULL)] = (_sel(K.FEATURE_MAP),)
    return policy


DEFAULT_POLICY = default_policy()


def required_semantics(
    task: TaskKind, fidelity: FidelityLevel, policy: Policy | None = None
) -> list[SemanticSelection]:
    policy = DEFAULT_POLICY if policy is None else policy
    return list(policy[(task, fidelity)])


def load_policy(path: str | Path, base: Policy | None = None) -> dict:
    """Overlay ``task,fidelity=kind+kind`` lines on ``base``.

    Blank lines and ``#`` comments are skipped.
    """
    policy = dict(DEFAULT_POLICY if base is None else base)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        task_text, comma, fidelity_text = key.partition(",")
        if not sep or not comma or not value.strip():
            raise SelectionError(f"{path}:{lineno}: expected 'task,fidelity=kind+kind'")
        try:
            task = TaskKind(task_text.strip().lower())
            fidelity = FidelityLevel(fidelity_text.strip().lower())
        except ValueError as e:
            raise SelectionError(f"{path}:{lineno}: {e}") from e
        selections = tuple(parse_selection(token) for token in value.split("+"))
        _check_combination(selections)
        policy[(task, fidelity)] = selections
    return policy


def _check_combination(selections: Sequence[SemanticSelection]) -> None:
    if not selections:
        raise SelectionError("no semantic kinds selected")
    kinds = [s.kind for s in selections]
    if SemanticKind.FEATURE_MAP in kinds and len(kinds) > 1:
        raise SelectionError("feature maps are never combined with other kinds")


def assemble_payload(
    scene: SceneAnnotation,
    kinds: Iterable[SemanticSelection | SemanticKind],
    filtered: SceneGraph | None = None,
    codec_config: CodecConfig | None = None,
) -> SemanticPayload:
    """Encode each selected kind and wrap the sections in one container."""
    selections = [SemanticSelection.of(item) for item in kinds]
    _check_combination(selections)
    config = codec_config or CodecConfig()
    sections = []
    for selection in selections:
        graph = None
        if selection.filtered:
            if filtered is None:
                raise MissingFilteredGraph(f"{selection.token} needs the filtered scene graph")
            graph = filtered
        sections.append(encode_section(selection.kind, scene, config, graph))
    payload = pack_payload(sections)
    logger.debug(
        "Assembled %s for %s: %d bits",
        "+".join(s.token for s in selections),
        scene.image_id,
        payload.bit_count,
    )
    return payload
