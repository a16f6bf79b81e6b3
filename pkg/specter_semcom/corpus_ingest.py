"""Scene annotation loading and relation co-occurrence statistics."""

from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, ParseError, SchemaError, ValidationError
from .semantic_model import (
    DEFAULT_VOCABULARY,
    BoundingBox,
    ObjectInstance,
    RelationInstance,
    SceneAnnotation,
    SceneGraph,
    Vocabulary,
    normalize_label,
    validate_scene,
)

logger = logging.getLogger(__name__)

STATS_MAGIC = b"SCST"
STATS_VERSION = 1

Triple = tuple[str, str, str]
Pair = tuple[str, str]


# --- scene documents ---------------------------------------------------------


def _require(container: Mapping, key: str, kind: type, where: str):
    if key not in container:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = container[key]
    # bool is an int subclass; a JSON true is never a valid coordinate or id.
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaError(
            f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def load_scene(
    document: bytes | str, vocabulary: Vocabulary = DEFAULT_VOCABULARY
) -> SceneAnnotation:
    """Parse one annotation document into a validated SceneAnnotation."""
    try:
        raw = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"annotation is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SchemaError("document: expected a JSON object at top level")

    image_id = _require(raw, "image_id", str, "document")
    width = _require(raw, "width", int, "document")
    height = _require(raw, "height", int, "document")
    raw_objects = _require(raw, "objects", list, "document")
    raw_relations = _require(raw, "relations", list, "document")

    violations: list[str] = []
    objects: list[ObjectInstance] = []
    layouts: dict[int, BoundingBox] = {}
    for i, entry in enumerate(raw_objects):
        where = f"objects[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        obj_id = _require(entry, "id", int, where)
        label = normalize_label(_require(entry, "label", str, where))
        bbox = _require(entry, "bbox", list, where)
        if len(bbox) != 4 or any(not isinstance(v, int) or isinstance(v, bool) for v in bbox):
            raise SchemaError(f"{where}.bbox: expected four integers [x, y, w, h]")
        class_id = vocabulary.object_index.get(label)
        if class_id is None:
            violations.append(f"{where}.label: {label!r} not in object vocabulary")
            class_id = -1
        objects.append(ObjectInstance(obj_id, label, class_id))
        layouts[obj_id] = BoundingBox(*bbox)

    relations: list[RelationInstance] = []
    for i, entry in enumerate(raw_relations):
        where = f"relations[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        subject_id = _require(entry, "subject_id", int, where)
        predicate = normalize_label(_require(entry, "predicate", str, where))
        object_id = _require(entry, "object_id", int, where)
        predicate_id = vocabulary.predicate_index.get(predicate)
        if predicate_id is None:
            violations.append(f"{where}.predicate: {predicate!r} not in relation vocabulary")
            predicate_id = -1
        relations.append(RelationInstance(subject_id, object_id, predicate, predicate_id))

    if violations:
        raise ValidationError(violations)
    scene = SceneAnnotation(
        image_id, width, height, SceneGraph(tuple(objects), tuple(relations)), layouts
    )
    violations = validate_scene(scene, vocabulary)
    if violations:
        raise ValidationError(violations)
    return scene


def scene_to_document(scene: SceneAnnotation) -> bytes:
    """Render a scene back into the annotation schema."""
    doc = {
        "image_id": scene.image_id,
        "width": scene.width,
        "height": scene.height,
        "objects": [
            {"id": obj.id, "label": obj.label, "bbox": scene.layouts[obj.id].as_list()}
            for obj in scene.graph.objects
        ],
        "relations": [
            {"subject_id": rel.subject_id, "predicate": rel.predicate, "object_id": rel.object_id}
            for rel in scene.graph.relations
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode()


def load_corpus(
    directory: str | Path, vocabulary: Vocabulary = DEFAULT_VOCABULARY
) -> list[SceneAnnotation]:
    """Load every ``*.json`` annotation in ``directory``, sorted by file name."""
    paths = sorted(Path(directory).glob("*.json"))
    scenes = [load_scene(path.read_bytes(), vocabulary) for path in paths]
    logger.info("Loaded %d scenes from %s", len(scenes), directory)
    return scenes


# --- relation statistics -----------------------------------------------------


@dataclass(frozen=True)
class RelationStats:
    pair_counts: Mapping[Pair, int]
    triple_counts: Mapping[Triple, int]
    corpus_size: int

    def __post_init__(self) -> None:
        derived: Counter = Counter()
        for (s, _, o), count in self.triple_counts.items():
            if count < 0:
                raise ValueError("Relation counts must be non-negative.")
            derived[(s, o)] += count
        if +derived != {k: v for k, v in self.pair_counts.items() if v}:
            raise ValueError("pair_counts must equal the per-pair sum of triple_counts.")

    @classmethod
    def from_triples(cls, triple_counts: Mapping[Triple, int], corpus_size: int) -> RelationStats:
        triples = {key: count for key, count in triple_counts.items() if count > 0}
        pairs: Counter = Counter()
        for (s, _, o), count in triples.items():
            pairs[(s, o)] += count
        return cls(dict(pairs), triples, corpus_size)


def _count_triples(scenes: Iterable[SceneAnnotation]) -> Counter:
    counts: Counter = Counter()
    for scene in scenes:
        labels = {obj.id: obj.label for obj in scene.graph.objects}
        for rel in scene.graph.relations:
            counts[(labels[rel.subject_id], rel.predicate, labels[rel.object_id])] += 1
    return counts


def merge_stats(a: RelationStats, b: RelationStats) -> RelationStats:
    counts = Counter(a.triple_counts)
    counts.update(b.triple_counts)
    return RelationStats.from_triples(counts, a.corpus_size + b.corpus_size)


def build_relation_stats(
    scenes: Sequence[SceneAnnotation], workers: int = 1
) -> RelationStats:
    """Count every ordered (subject, predicate, object) triple across ``scenes``."""
    scenes = list(scenes)
    if workers <= 1 or len(scenes) < 2:
        return RelationStats.from_triples(_count_triples(scenes), len(scenes))

    shard_size = -(-len(scenes) // workers)
    shards = [scenes[i : i + shard_size] for i in range(0, len(scenes), shard_size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(
            pool.map(
                lambda shard: RelationStats.from_triples(_count_triples(shard), len(shard)),
                shards,
            )
        )
    merged = partials[0]
    for partial in partials[1:]:
        merged = merge_stats(merged, partial)
    return merged


def conditional_probability(
    stats: RelationStats,
    subject_label: str,
    predicate: str,
    object_label: str,
    *,
    smoothing: bool = False,
    num_predicates: int = len(DEFAULT_VOCABULARY.predicates) - 1,
) -> float:
    """Empirical P(predicate | subject, object); 0 for an unseen ordered pair."""
    triple = stats.triple_counts.get((subject_label, predicate, object_label), 0)
    pair = stats.pair_counts.get((subject_label, object_label), 0)
    if smoothing:
        return (triple + 1) / (pair + num_predicates)
    if pair == 0:
        return 0.0
    return triple / pair


# --- stats file --------------------------------------------------------------


def _pack_str(value: str) -> bytes:
    raw = value.encode()
    return struct.pack("<H", len(raw)) + raw


def stats_to_bytes(stats: RelationStats) -> bytes:
    records = sorted(
        ((s, o, p), count) for (s, p, o), count in stats.triple_counts.items()
    )
    out = [STATS_MAGIC, struct.pack("<IQI", STATS_VERSION, stats.corpus_size, len(records))]
    for (s, o, p), count in records:
        out += [_pack_str(s), _pack_str(o), _pack_str(p), struct.pack("<Q", count)]
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"stats file truncated at byte {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<H")
        try:
            return self.take(length).decode()
        except UnicodeDecodeError as e:
            raise FormatError(f"invalid label bytes at {self.pos}") from e


def stats_from_bytes(data: bytes) -> RelationStats:
    reader = _Reader(data)
    if reader.take(4) != STATS_MAGIC:
        raise FormatError("not a relation stats file (bad magic)")
    version, corpus_size, n_records = reader.unpack("<IQI")
    if version != STATS_VERSION:
        raise FormatError(f"unsupported stats version {version}, expected {STATS_VERSION}")
    triples: dict[Triple, int] = {}
    for _ in range(n_records):
        s, o, p = reader.string(), reader.string(), reader.string()
        (count,) = reader.unpack("<Q")
        triples[(s, p, o)] = count
    if reader.pos != len(data):
        raise FormatError(f"{len(data) - reader.pos} trailing bytes after stats records")
    return RelationStats.from_triples(triples, corpus_size)


def persist_stats(stats: RelationStats, path: str | Path) -> None:
    Path(path).write_bytes(stats_to_bytes(stats))
    logger.info(
        "Wrote %d triples (%d scenes) to %s", len(stats.triple_counts), stats.corpus_size, path
    )


def load_stats(path: str | Path) -> RelationStats:
    return stats_from_bytes(Path(path).read_bytes())
