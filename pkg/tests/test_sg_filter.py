"""Unit tests for scene-graph filtering."""

from unittest.mock import MagicMock

import numpy as np
import pytest

from specter_semcom.corpus_ingest import RelationStats, build_relation_stats
from specter_semcom.embedding import EmbeddingVector, FileEmbedder, HashEmbedder
from specter_semcom.semantic_model import (
    DEFAULT_VOCABULARY,
    ObjectInstance,
    RelationInstance,
    SceneGraph,
)
from specter_semcom.sg_filter import (
    STAGE_LESS_INFORMATIVE,
    STAGE_REDUNDANT,
    FilterConfig,
    filter_less_informative,
    filter_redundant,
    filter_scene_graph,
    residual_norm,
    span_residual_oracle,
)


def _graph(labels, triples):
    objects = tuple(
        ObjectInstance(i, label, DEFAULT_VOCABULARY.object_index[label])
        for i, label in enumerate(labels)
    )
    relations = tuple(
        RelationInstance(s, o, p, DEFAULT_VOCABULARY.predicate_index[p]) for s, p, o in triples
    )
    return SceneGraph(objects, relations)


def _fixed_embedder(rows):
    embedder = MagicMock()
    embedder.embed.return_value = [EmbeddingVector(r) for r in rows]
    return embedder


# --- less-informative relations ---


def test_certain_relations_are_removed(ski_scene, corpus_scenes):
    stats = build_relation_stats(corpus_scenes)
    filtered, report = filter_less_informative(ski_scene.graph, stats, 0.8)
    assert [r.predicate for r in filtered.relations] == ["riding", "holding", "in"]
    assert [r.triple for r in report.removed_by_alg1] == [
        ("man", "has", "head"),
        ("man", "has", "hand"),
    ]
    assert all(r.probability == pytest.approx(1.0) for r in report.removed_by_alg1)
    assert filtered.objects == ski_scene.graph.objects


def test_planted_corpus_removes_dominant_predicate():
    # 200 scenes: "man wearing shirt" 190 times, "man has shirt" 10 times.
    stats = RelationStats.from_triples(
        {("man", "wearing", "shirt"): 190, ("man", "has", "shirt"): 10}, 200
    )
    graph = _graph(["man", "shirt"], [(0, "wearing", 1), (0, "has", 1)])
    filtered, report = filter_less_informative(graph, stats, 0.8)
    assert [r.predicate for r in filtered.relations] == ["has"]
    assert report.removed_by_alg1[0].probability == pytest.approx(0.95)


def test_threshold_is_inclusive():
    stats = RelationStats.from_triples({("man", "near", "dog"): 4, ("man", "on", "dog"): 1}, 5)
    graph = _graph(["man", "dog"], [(0, "near", 1)])
    assert filter_less_informative(graph, stats, 0.8)[0].relations == ()
    assert len(filter_less_informative(graph, stats, 0.81)[0].relations) == 1


def test_unseen_pair_is_kept():
    stats = RelationStats.from_triples({}, 0)
    graph = _graph(["man", "dog"], [(0, "near", 1)])
    filtered, _ = filter_less_informative(graph, stats, 0.5)
    assert len(filtered.relations) == 1


@pytest.mark.parametrize("tau_f, kept", [(0.0, 0), (1.0, 3)])
def test_extreme_tau_f(ski_scene, corpus_scenes, tau_f, kept):
    stats = build_relation_stats(corpus_scenes)
    filtered, _ = filter_less_informative(ski_scene.graph, stats, tau_f)
    assert len(filtered.relations) == kept


# --- residual norms ---


def test_residual_of_orthonormal_vectors_is_one():
    vectors = np.eye(3)
    for k in range(3):
        assert residual_norm(k, vectors) == pytest.approx(1.0)
        assert span_residual_oracle(k, vectors) == pytest.approx(1.0)


def test_duplicate_vector_has_zero_residual():
    vectors = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert residual_norm(1, vectors) == pytest.approx(0.0)
    assert span_residual_oracle(1, vectors) == pytest.approx(0.0)


def test_sequential_residual_never_below_span_residual():
    rng = np.random.default_rng(3)
    for _ in range(20):
        vectors = rng.standard_normal((5, 8))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        for k in range(5):
            assert residual_norm(k, vectors) >= span_residual_oracle(k, vectors) - 1e-12


def _orthonormal_rows(rng, n, dim):
    q, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    return q.T


def test_residual_matches_span_on_random_orthonormal_sets():
    rng = np.random.default_rng(7)
    for _ in range(100):
        dim = int(rng.integers(4, 65))
        vectors = _orthonormal_rows(rng, int(rng.integers(1, dim + 1)), dim)
        for k in range(vectors.shape[0]):
            assert residual_norm(k, vectors) == pytest.approx(
                span_residual_oracle(k, vectors), abs=1e-9
            )


def test_single_vector_keeps_full_norm():
    assert residual_norm(0, np.array([[0.6, 0.8]])) == pytest.approx(1.0)
    assert span_residual_oracle(0, np.array([[0.6, 0.8]])) == pytest.approx(1.0)


# --- redundant sub-graphs ---


def test_near_duplicate_sentence_removed_on_tie(ski_embeddings):
    graph = _graph(
        ["man", "ski", "pole", "hand"],
        [(0, "riding", 1), (0, "holding", 2), (2, "in", 3)],
    )
    filtered, report = filter_redundant(graph, FileEmbedder(ski_embeddings), 0.8)
    assert [r.predicate for r in filtered.relations] == ["riding", "holding"]
    (removed,) = report.removed_by_alg2
    assert removed.sentence == "pole in hand"
    assert removed.residual_norm == pytest.approx(0.3 / np.sqrt(1.09), abs=1e-6)
    assert report.alg2_iterations == 2


def test_empty_graph_does_not_embed():
    embedder = MagicMock()
    filtered, report = filter_redundant(SceneGraph(), embedder, 0.8)
    assert filtered == SceneGraph()
    assert report.kept == []
    embedder.embed.assert_not_called()


def test_single_relation_survives_high_threshold():
    graph = _graph(["man", "dog"], [(0, "near", 1)])
    filtered, _ = filter_redundant(graph, HashEmbedder(dim=16), 0.99)
    assert len(filtered.relations) == 1


def test_zero_threshold_removes_nothing(ski_scene):
    filtered, report = filter_redundant(ski_scene.graph, HashEmbedder(dim=16), 0.0)
    assert filtered.relations == ski_scene.graph.relations
    assert report.removed_by_alg2 == []
    assert report.alg2_iterations == 1


def test_identical_embeddings_collapse_to_first():
    graph = _graph(["man", "dog", "car"], [(0, "near", 1), (1, "near", 2), (0, "near", 2)])
    embedder = _fixed_embedder([[1.0, 0.0]] * 3)
    filtered, report = filter_redundant(graph, embedder, 0.5)
    assert [(r.subject_id, r.object_id) for r in filtered.relations] == [(0, 1)]
    assert [r.sentence for r in report.removed_by_alg2] == ["man near car", "dog near car"]


def test_non_unit_embeddings_rejected():
    graph = _graph(["man", "dog"], [(0, "near", 1)])
    with pytest.raises(ValueError, match="unit-norm"):
        filter_redundant(graph, _fixed_embedder([[2.0, 0.0]]), 0.5)


def _chain(n):
    labels = DEFAULT_VOCABULARY.objects[1 : n + 2]
    return _graph(labels, [(i, "near", i + 1) for i in range(n)])


def test_one_of_each_duplicate_pair_is_removed():
    rng = np.random.default_rng(5)
    base = _orthonormal_rows(rng, 6, 16)
    rows = np.vstack([base, base[[1, 4]]])
    filtered, report = filter_redundant(_chain(8), _fixed_embedder(rows), 0.8)
    assert [r.subject_id for r in filtered.relations] == [0, 1, 2, 3, 4, 5]
    assert len(report.removed_by_alg2) == 2
    assert all(r.residual_norm == pytest.approx(0.0, abs=1e-9) for r in report.removed_by_alg2)


def test_orthonormal_embeddings_are_all_kept():
    rows = _orthonormal_rows(np.random.default_rng(6), 5, 12)
    graph = _chain(5)
    filtered, report = filter_redundant(graph, _fixed_embedder(rows), 0.8)
    assert filtered.relations == graph.relations
    assert report.removed_by_alg2 == []


def test_redundancy_filter_terminates_on_random_instances():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        rows = rng.standard_normal((n, int(rng.integers(2, 17))))
        if n > 1 and rng.random() < 0.5:
            rows[-1] = rows[0] + 0.01 * rng.standard_normal(rows.shape[1])
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        tau_r = float(rng.random())
        filtered, report = filter_redundant(_chain(n), _fixed_embedder(rows), tau_r)
        assert report.alg2_iterations <= n
        assert len(filtered.relations) + len(report.removed_by_alg2) == n
        survivors = rows[[r.subject_id for r in filtered.relations]]
        for k in range(survivors.shape[0]):
            assert residual_norm(k, survivors) >= tau_r - 1e-12


# --- pipeline ---


def test_pipeline_on_ski_scene(ski_scene, corpus_scenes, ski_embeddings):
    stats = build_relation_stats(corpus_scenes)
    filtered, report = filter_scene_graph(
        ski_scene.graph, stats, FileEmbedder(ski_embeddings), FilterConfig(0.8, 0.8)
    )
    assert report.kept == [("man", "riding", "ski"), ("man", "holding", "pole")]
    assert len(filtered.relations) == 2
    assert report.stage_order == (STAGE_LESS_INFORMATIVE, STAGE_REDUNDANT)
    assert report.retention_fraction == pytest.approx(0.4)

    as_dict = report.to_dict()
    assert as_dict["input_relations"] == 5
    assert as_dict["tau_f"] == 0.8
    assert [r["sentence"] for r in as_dict["removed_by_redundancy"]] == ["pole in hand"]
    assert as_dict["removed_by_less_informative"][0]["triple"] == ["man", "has", "head"]


def test_pipeline_keeps_objects(ski_scene, corpus_scenes):
    stats = build_relation_stats(corpus_scenes)
    filtered, _ = filter_scene_graph(ski_scene.graph, stats, HashEmbedder(dim=32))
    assert filtered.objects == ski_scene.graph.objects
    assert set(filtered.relations) <= set(ski_scene.graph.relations)


@pytest.mark.parametrize("tau_f, tau_r", [(-0.1, 0.5), (0.5, 1.5)])
def test_config_rejects_out_of_range_thresholds(tau_f, tau_r):
    with pytest.raises(ValueError, match="within"):
        FilterConfig(tau_f, tau_r)
