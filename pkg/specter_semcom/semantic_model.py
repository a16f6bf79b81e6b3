"""Core value types for visual semantics and the typed payload bundle."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property

import numpy as np

# Visual-Genome 150-object / 50-predicate split. Index 0 is the background
# sentinel in both lists; multi-word entries use underscores.
_VG_OBJECTS = (
    "__background__ airplane animal arm bag banana basket beach bear bed bench "
    "bike bird board boat book boot bottle bowl box boy branch building bus "
    "cabinet cap car cat chair child clock coat counter cow cup curtain desk "
    "dog door drawer ear elephant engine eye face fence finger flag flower "
    "food fork fruit giraffe girl glass glove guy hair hand handle hat head "
    "helmet hill horse house jacket jean kid kite lady lamp laptop leaf leg "
    "letter light logo man men motorcycle mountain mouth neck nose number "
    "orange pant paper paw people person phone pillow pizza plane plant plate "
    "player pole post pot racket railing rock roof room screen seat sheep "
    "shelf shirt shoe short sidewalk sign sink skateboard ski skier sneaker "
    "snow sock stand street surfboard table tail tie tile tire toilet towel "
    "tower track train tree truck trunk umbrella vase vegetable vehicle wave "
    "wheel window windshield wing wire woman zebra"
).split()

_VG_PREDICATES = (
    "__background__ above across against along and at attached_to behind "
    "belonging_to between carrying covered_in covering eating flying_in for "
    "from growing_on hanging_from has holding in in_front_of laying_on "
    "looking_at lying_on made_of mounted_on near of on on_back_of over "
    "painted_on parked_on part_of playing riding says sitting_on standing_on "
    "to under using walking_in walking_on watching wearing wears with"
).split()


def normalize_label(label: str) -> str:
    """Lowercase and join words with underscores so labels stay space-free."""
    return "_".join(label.strip().lower().split())


@dataclass(frozen=True)
class Vocabulary:
    objects: tuple[str, ...]
    predicates: tuple[str, ...]

    def __post_init__(self) -> None:
        for name, labels in (("objects", self.objects), ("predicates", self.predicates)):
            if len(set(labels)) != len(labels):
                raise ValueError(f"Vocabulary {name} contains duplicate labels.")
            bad = [label for label in labels if label != normalize_label(label) or not label]
            if bad:
                raise ValueError(
                    f"Vocabulary {name} must be lowercase, space-free tokens; got {bad[:3]!r}."
                )

    @cached_property
    def object_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.objects)}

    @cached_property
    def predicate_index(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.predicates)}


DEFAULT_VOCABULARY = Vocabulary(tuple(_VG_OBJECTS), tuple(_VG_PREDICATES))


# --- scene graph types -------------------------------------------------------


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    label: str
    class_id: int


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class RelationInstance:
    subject_id: int
    object_id: int
    predicate: str
    predicate_id: int


@dataclass(frozen=True)
class SceneGraph:
    objects: tuple[ObjectInstance, ...] = ()
    relations: tuple[RelationInstance, ...] = ()

    def object_by_id(self) -> dict[int, ObjectInstance]:
        return {obj.id: obj for obj in self.objects}

    def with_relations(self, relations) -> SceneGraph:
        return SceneGraph(self.objects, tuple(relations))


@dataclass(frozen=True)
class SubGraphSentence:
    subject_label: str
    predicate: str
    object_label: str

    @property
    def text(self) -> str:
        return f"{self.subject_label} {self.predicate} {self.object_label}"

    def __str__(self) -> str:
        return self.text


def parse_sentence(text: str) -> SubGraphSentence:
    parts = text.split(" ")
    if len(parts) != 3 or not all(parts):
        raise ValueError(f"Not a subject-predicate-object sentence: {text!r}")
    return SubGraphSentence(*parts)


@dataclass(frozen=True, eq=False)
class SegmentationGrid:
    """Row-major class-id grid; 0 is background."""

    width_cells: int
    height_cells: int
    cells: np.ndarray

    def __post_init__(self) -> None:
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("Segmentation grid dimensions must be positive.")
        cells = np.array(self.cells, dtype=np.int64).reshape(-1)
        if cells.size != self.width_cells * self.height_cells:
            raise ValueError(
                f"Grid has {cells.size} cells, expected "
                f"{self.width_cells}x{self.height_cells}."
            )
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SegmentationGrid):
            return NotImplemented
        return (
            self.width_cells == other.width_cells
            and self.height_cells == other.height_cells
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureMapSpec:
    channels: int
    width: int
    height: int
    quant_bits: int = 8
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if min(self.channels, self.width, self.height) < 1:
            raise ValueError("Feature map dimensions must be positive.")
        if not 1 <= self.quant_bits <= 16:
            raise ValueError(f"quant_bits must be in [1, 16], got {self.quant_bits}.")
        if self.values is not None:
            values = np.array(self.values, dtype=np.float64).reshape(-1)
            if values.size != self.size:
                raise ValueError(
                    f"Feature map has {values.size} values, expected {self.size}."
                )
            values.flags.writeable = False
            object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.channels * self.width * self.height


@dataclass(frozen=True)
class SceneAnnotation:
    image_id: str
    width: int
    height: int
    graph: SceneGraph
    layouts: Mapping[int, BoundingBox] = field(default_factory=dict)


class SemanticKind(StrEnum):
    OBJECTS = "objects"
    LAYOUTS = "layouts"
    OBJECTS_LAYOUTS = "objects_layouts"
    SEGMAP = "segmap"
    SCENE_GRAPH_FULL = "sg"
    SCENE_GRAPH_FILTERED = "sg_filtered"
    SCENE_GRAPH_LAYOUTS = "sg_layouts"
    FEATURE_MAP = "feature_map"
    COMPRESSED_IMAGE = "compressed_image"

    @property
    def tag(self) -> int:
        return list(SemanticKind).index(self)

    @classmethod
    def from_tag(cls, tag: int) -> SemanticKind:
        return list(cls)[tag]

    @property
    def is_text(self) -> bool:
        return self in TEXT_KINDS


TEXT_KINDS = frozenset(
    {
        SemanticKind.OBJECTS,
        SemanticKind.LAYOUTS,
        SemanticKind.OBJECTS_LAYOUTS,
        SemanticKind.SCENE_GRAPH_FULL,
        SemanticKind.SCENE_GRAPH_FILTERED,
        SemanticKind.SCENE_GRAPH_LAYOUTS,
    }
)


@dataclass(frozen=True)
class SemanticPayload:
    """A serialized semantic bundle. ``bits`` is MSB-first, zero-padded to a byte."""

    kind: SemanticKind
    bits: bytes
    bit_count: int
    source_image: tuple[int, int]

    def __post_init__(self) -> None:
        if self.bit_count < 0:
            raise ValueError("bit_count must be non-negative.")
        if len(self.bits) != math.ceil(self.bit_count / 8):
            raise ValueError(
                f"{len(self.bits)} bytes cannot hold exactly {self.bit_count} bits."
            )

    @classmethod
    def from_bit_array(
        cls, kind: SemanticKind, bit_array: np.ndarray, source_image: tuple[int, int]
    ) -> SemanticPayload:
        bit_array = np.asarray(bit_array, dtype=np.uint8)
        return cls(kind, np.packbits(bit_array).tobytes(), int(bit_array.size), source_image)

    def unpacked(self) -> np.ndarray:
        raw = np.frombuffer(self.bits, dtype=np.uint8)
        return np.unpackbits(raw)[: self.bit_count]


# --- operations --------------------------------------------------------------


def _box_violations(prefix: str, box: BoundingBox, width: int, height: int) -> list[str]:
    problems = []
    if box.w < 1 or box.h < 1:
        problems.append(f"{prefix}: box size must be at least 1x1, got {box.w}x{box.h}")
    if box.x < 0 or box.x + box.w > width:
        problems.append(
            f"{prefix}: box x-range [{box.x}, {box.x + box.w}) exceeds bounds [0, {width})"
        )
    if box.y < 0 or box.y + box.h > height:
        problems.append(
            f"{prefix}: box y-range [{box.y}, {box.y + box.h}) exceeds bounds [0, {height})"
        )
    return problems


def validate_scene(
    scene: SceneAnnotation, vocabulary: Vocabulary = DEFAULT_VOCABULARY
) -> list[str]:
    """Return one description per broken invariant; empty when the scene is valid."""
    problems: list[str] = []
    if scene.width < 1 or scene.height < 1:
        problems.append(f"image size: must be positive, got {scene.width}x{scene.height}")

    seen_ids: set[int] = set()
    for i, obj in enumerate(scene.graph.objects):
        where = f"objects[{i}]"
        if obj.id < 0:
            problems.append(f"{where}.id: must be non-negative, got {obj.id}")
        if obj.id in seen_ids:
            problems.append(f"{where}.id: duplicate object id {obj.id}")
        seen_ids.add(obj.id)
        if not 0 <= obj.class_id < len(vocabulary.objects):
            problems.append(
                f"{where}.class_id: {obj.class_id} outside object vocabulary "
                f"[0, {len(vocabulary.objects)})"
            )
        elif vocabulary.objects[obj.class_id] != obj.label:
            problems.append(
                f"{where}.label: {obj.label!r} does not match vocabulary entry "
                f"{vocabulary.objects[obj.class_id]!r}"
            )

    triples: set[tuple[int, int, int]] = set()
    for i, rel in enumerate(scene.graph.relations):
        where = f"relations[{i}]"
        if rel.subject_id == rel.object_id:
            problems.append(f"{where}: subject_id equals object_id ({rel.subject_id})")
        for end in ("subject_id", "object_id"):
            ref = getattr(rel, end)
            if ref not in seen_ids:
                problems.append(
                    f"{where}.{end}: references missing object {ref} (referential integrity)"
                )
        if not 0 <= rel.predicate_id < len(vocabulary.predicates):
            problems.append(
                f"{where}.predicate_id: {rel.predicate_id} outside relation vocabulary "
                f"[0, {len(vocabulary.predicates)})"
            )
        elif vocabulary.predicates[rel.predicate_id] != rel.predicate:
            problems.append(
                f"{where}.predicate: {rel.predicate!r} does not match vocabulary entry "
                f"{vocabulary.predicates[rel.predicate_id]!r}"
            )
        key = (rel.subject_id, rel.predicate_id, rel.object_id)
        if key in triples:
            problems.append(f"{where}: duplicate triple {key}")
        triples.add(key)

    for i, obj in enumerate(scene.graph.objects):
        box = scene.layouts.get(obj.id)
        if box is None:
            problems.append(f"layouts[{obj.id}]: object {i} has no bounding box")
            continue
        problems.extend(_box_violations(f"layouts[{obj.id}]", box, scene.width, scene.height))
    return problems


def to_sentences(graph: SceneGraph) -> list[SubGraphSentence]:
    """One sentence per relation, in relation order."""
    objects = graph.object_by_id()
    return [
        SubGraphSentence(
            objects[rel.subject_id].label.lower(),
            rel.predicate.lower(),
            objects[rel.object_id].label.lower(),
        )
        for rel in graph.relations
    ]


def rasterize_segmentation(
    scene: SceneAnnotation, width_cells: int = 128, height_cells: int = 128
) -> SegmentationGrid:
    """Paint each box onto a cell grid in ascending object id order.

    A cell takes an object's class id when the box overlaps it at all, so even
    sub-cell boxes leave a mark. Later ids overwrite earlier ones.
    """
    cells = np.zeros((height_cells, width_cells), dtype=np.int64)
    for obj in sorted(scene.graph.objects, key=lambda o: o.id):
        box = scene.layouts[obj.id]
        c0 = box.x * width_cells // scene.width
        c1 = max(c0 + 1, -(-(box.x + box.w) * width_cells // scene.width))
        r0 = box.y * height_cells // scene.height
        r1 = max(r0 + 1, -(-(box.y + box.h) * height_cells // scene.height))
        cells[r0:r1, c0:c1] = obj.class_id
    return SegmentationGrid(width_cells, height_cells, cells)
