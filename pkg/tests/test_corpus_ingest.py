"""Unit tests for annotation loading and relation statistics."""

import json

import pytest

from specter_semcom.corpus_ingest import (
    STATS_MAGIC,
    RelationStats,
    build_relation_stats,
    conditional_probability,
    load_corpus,
    load_scene,
    load_stats,
    persist_stats,
    scene_to_document,
    stats_from_bytes,
    stats_to_bytes,
)
from specter_semcom.errors import FormatError, ParseError, SchemaError, ValidationError

_MINIMAL = {
    "image_id": "m",
    "width": 10,
    "height": 10,
    "objects": [
        {"id": 0, "label": "man", "bbox": [0, 0, 5, 5]},
        {"id": 1, "label": "dog", "bbox": [5, 5, 5, 5]},
    ],
    "relations": [{"subject_id": 0, "predicate": "near", "object_id": 1}],
}


def _doc(**overrides):
    doc = json.loads(json.dumps(_MINIMAL))
    doc.update(overrides)
    return json.dumps(doc)


# --- load_scene ---


def test_load_scene_parses_fixture(ski_scene):
    assert ski_scene.image_id == "ski_scene"
    assert (ski_scene.width, ski_scene.height) == (512, 512)
    assert [o.label for o in ski_scene.graph.objects] == ["man", "ski", "pole", "hand", "head"]
    assert ski_scene.layouts[2].as_list() == [84, 48, 4, 60]


def test_multi_word_predicates_are_normalized(corpus_scenes):
    slope = next(s for s in corpus_scenes if s.image_id == "slope_scene")
    assert slope.graph.relations[0].predicate == "standing_on"


def test_not_json_is_parse_error():
    with pytest.raises(ParseError):
        load_scene(b"{not json")


@pytest.mark.parametrize(
    "document, message",
    [
        ("[]", "top level"),
        (_doc(width="10"), "width: expected int"),
        (_doc(width=True), "width: expected int"),
        (json.dumps({k: v for k, v in _MINIMAL.items() if k != "objects"}), "'objects'"),
        (_doc(objects=[{"id": 0, "label": "man", "bbox": [0, 0, 5]}]), "four integers"),
    ],
)
def test_schema_errors(document, message):
    with pytest.raises(SchemaError, match=message):
        load_scene(document)


def test_unknown_label_is_validation_error():
    doc = _doc(objects=[{"id": 0, "label": "spaceship", "bbox": [0, 0, 5, 5]}], relations=[])
    with pytest.raises(ValidationError) as exc:
        load_scene(doc)
    assert any("spaceship" in v for v in exc.value.violations)


def test_dangling_relation_is_validation_error():
    doc = _doc(relations=[{"subject_id": 0, "predicate": "near", "object_id": 9}])
    with pytest.raises(ValidationError, match="missing object 9"):
        load_scene(doc)


def test_box_outside_image_is_validation_error():
    doc = _doc(objects=[{"id": 0, "label": "man", "bbox": [8, 0, 5, 5]}], relations=[])
    with pytest.raises(ValidationError, match="exceeds bounds"):
        load_scene(doc)


def test_scene_document_round_trips(ski_scene):
    again = load_scene(scene_to_document(ski_scene))
    assert again == ski_scene


def test_load_corpus_sorts_by_file_name(corpus_dir):
    scenes = load_corpus(corpus_dir)
    assert [s.image_id for s in scenes] == ["park_scene", "ski_scene", "slope_scene"]


# --- statistics ---


def test_stats_count_ordered_triples(corpus_scenes):
    stats = build_relation_stats(corpus_scenes)
    assert stats.corpus_size == 3
    assert stats.triple_counts[("man", "has", "head")] == 2
    assert stats.triple_counts[("man", "riding", "ski")] == 1
    assert stats.pair_counts[("man", "ski")] == 2
    assert ("ski", "man") not in stats.pair_counts
    assert sum(stats.pair_counts.values()) == sum(stats.triple_counts.values()) == 12


def test_threaded_build_matches_serial(corpus_scenes):
    assert build_relation_stats(corpus_scenes, workers=3) == build_relation_stats(corpus_scenes)


def test_pair_counts_must_match_triples():
    with pytest.raises(ValueError, match="per-pair sum"):
        RelationStats({("a", "b"): 3}, {("a", "p", "b"): 2}, 1)


@pytest.mark.parametrize(
    "triple, expected",
    [
        (("man", "riding", "ski"), 0.5),
        (("man", "has", "head"), 1.0),
        (("man", "has", "ski"), 0.0),
        (("ski", "riding", "man"), 0.0),
    ],
)
def test_conditional_probability(corpus_scenes, triple, expected):
    stats = build_relation_stats(corpus_scenes)
    assert conditional_probability(stats, *triple) == pytest.approx(expected)


def test_probabilities_sum_to_one_per_seen_pair(corpus_scenes):
    stats = build_relation_stats(corpus_scenes)
    for s, o in stats.pair_counts:
        seen = [p for (s2, p, o2) in stats.triple_counts if (s2, o2) == (s, o)]
        total = sum(conditional_probability(stats, s, p, o) for p in seen)
        assert total == pytest.approx(1.0)


def test_smoothing_never_returns_zero(corpus_scenes):
    stats = build_relation_stats(corpus_scenes)
    p = conditional_probability(stats, "ski", "riding", "man", smoothing=True, num_predicates=50)
    assert p == pytest.approx(1 / 50)


# --- stats file ---


def test_stats_file_round_trip_is_byte_identical(corpus_scenes, tmp_path):
    stats = build_relation_stats(corpus_scenes)
    path = tmp_path / "stats.bin"
    persist_stats(stats, path)
    loaded = load_stats(path)
    assert loaded == stats
    assert stats_to_bytes(loaded) == path.read_bytes()


def test_stats_bytes_independent_of_insertion_order():
    a = RelationStats.from_triples({("a", "p", "b"): 1, ("c", "q", "d"): 2}, 2)
    b = RelationStats.from_triples({("c", "q", "d"): 2, ("a", "p", "b"): 1}, 2)
    assert stats_to_bytes(a) == stats_to_bytes(b)


def test_empty_stats_round_trip():
    empty = RelationStats.from_triples({}, 0)
    assert stats_from_bytes(stats_to_bytes(empty)) == empty


def test_truncated_stats_is_format_error(corpus_scenes):
    data = stats_to_bytes(build_relation_stats(corpus_scenes))
    with pytest.raises(FormatError, match="truncated"):
        stats_from_bytes(data[:-3])


def test_bad_magic_and_trailing_bytes(corpus_scenes):
    data = stats_to_bytes(build_relation_stats(corpus_scenes))
    assert data.startswith(STATS_MAGIC)
    with pytest.raises(FormatError, match="magic"):
        stats_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="trailing"):
        stats_from_bytes(data + b"\x00")
