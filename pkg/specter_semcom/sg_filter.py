"""Scene-graph filtering: less-informative relations, then redundant sub-graphs.

The first stage drops relations whose predicate is nearly certain given the
two objects (``P(r | o_i, o_j) >= tau_f``). The second embeds each remaining
sub-graph sentence and repeatedly removes the one whose embedding has the
smallest residual after projecting out all the others, while that residual
stays below ``tau_r``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from .corpus_ingest import RelationStats, conditional_probability
from .embedding import Embedder, EmbeddingVector
from .embedding.base import NORM_TOLERANCE
from .semantic_model import SceneGraph, to_sentences

logger = logging.getLogger(__name__)

# Residuals within this distance of the minimum count as tied.
TIE_TOLERANCE = 1e-12

STAGE_LESS_INFORMATIVE = "less_informative"
STAGE_REDUNDANT = "redundant"


class ProjectionOrder(StrEnum):
    ASCENDING_INDEX = "ascending_index"


@dataclass(frozen=True)
class FilterConfig:
    tau_f: float = 0.8
    tau_r: float = 0.8
    projection_order: ProjectionOrder = ProjectionOrder.ASCENDING_INDEX
    smoothing: bool = False

    def __post_init__(self) -> None:
        for name in ("tau_f", "tau_r"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {value}.")


@dataclass(frozen=True)
class ProbabilityRemoval:
    triple: tuple[str, str, str]
    probability: float


@dataclass(frozen=True)
class RedundancyRemoval:
    sentence: str
    residual_norm: float


@dataclass
class FilterReport:
    input_size: int
    kept: list[tuple[str, str, str]]
    removed_by_alg1: list[ProbabilityRemoval] = field(default_factory=list)
    removed_by_alg2: list[RedundancyRemoval] = field(default_factory=list)
    stage_order: tuple[str, ...] = ()
    alg2_iterations: int = 0
    tau_f: float | None = None
    tau_r: float | None = None

    @property
    def retention_fraction(self) -> float:
        return len(self.kept) / max(1, self.input_size)

    def to_dict(self) -> dict:
        return {
            "stage_order": list(self.stage_order),
            "tau_f": self.tau_f,
            "tau_r": self.tau_r,
            "input_relations": self.input_size,
            "removed_by_less_informative": [
                {"triple": list(r.triple), "probability": r.probability}
                for r in self.removed_by_alg1
            ],
            "removed_by_redundancy": [
                {"sentence": r.sentence, "residual_norm": r.residual_norm}
                for r in self.removed_by_alg2
            ],
            "redundancy_iterations": self.alg2_iterations,
            "kept": [list(t) for t in self.kept],
            "retention_fraction": self.retention_fraction,
        }


def _triples(graph: SceneGraph) -> list[tuple[str, str, str]]:
    return [(s.subject_label, s.predicate, s.object_label) for s in to_sentences(graph)]


# --- less-informative relations ----------------------------------------------


def filter_less_informative(
    graph: SceneGraph, stats: RelationStats, tau_f: float, *, smoothing: bool = False
) -> tuple[SceneGraph, FilterReport]:
    """Drop every relation with ``P(predicate | subject, object) >= tau_f``.

    Objects are never removed, only edges.
    """
    kept_relations = []
    kept: list[tuple[str, str, str]] = []
    removed: list[ProbabilityRemoval] = []
    for rel, triple in zip(graph.relations, _triples(graph), strict=True):
        p = conditional_probability(stats, *triple, smoothing=smoothing)
        if p >= tau_f:
            logger.debug("Dropping %s (P=%.4f >= %.4f)", " ".join(triple), p, tau_f)
            removed.append(ProbabilityRemoval(triple, p))
        else:
            kept_relations.append(rel)
            kept.append(triple)
    report = FilterReport(
        len(graph.relations),
        kept,
        removed_by_alg1=removed,
        stage_order=(STAGE_LESS_INFORMATIVE,),
        tau_f=tau_f,
    )
    return graph.with_relations(kept_relations), report


# --- redundant sub-graphs ----------------------------------------------------


def _as_matrix(vectors: Sequence[EmbeddingVector] | np.ndarray) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    return np.vstack([v.components for v in vectors])


def residual_norm(k: int, vectors: Sequence[EmbeddingVector] | np.ndarray) -> float:
    """Norm of ``g_k`` after subtracting its projection on every other vector in
    turn, ascending index, using the original (non-orthogonalized) vectors."""
    g = _as_matrix(vectors)
    r = g[k].copy()
    for j in range(g.shape[0]):
        if j != k:
            r -= (r @ g[j]) * g[j]
    return float(np.linalg.norm(r))


def span_residual_oracle(k: int, vectors: Sequence[EmbeddingVector] | np.ndarray) -> float:
    """Norm of the component of ``g_k`` orthogonal to span{g_j : j != k}."""
    g = _as_matrix(vectors)
    others = np.delete(g, k, axis=0)
    if others.shape[0] == 0:
        return float(np.linalg.norm(g[k]))
    u, s, _ = np.linalg.svd(others.T, full_matrices=False)
    tol = s.max(initial=0.0) * max(others.shape) * np.finfo(np.float64).eps
    basis = u[:, s > tol]
    residual = g[k] - basis @ (basis.T @ g[k])
    return float(np.linalg.norm(residual))


def filter_redundant(
    graph: SceneGraph, embedder: Embedder, tau_r: float
) -> tuple[SceneGraph, FilterReport]:
    """Remove, one at a time, the sub-graph with the smallest residual norm
    while that norm is below ``tau_r``.

    On a tie for the minimum the largest index goes first, so earlier-listed
    relations survive.
    """
    base = FilterReport(len(graph.relations), [], stage_order=(STAGE_REDUNDANT,), tau_r=tau_r)
    if not graph.relations:
        return graph, base

    triples = _triples(graph)
    sentences = [" ".join(t) for t in triples]
    matrix = _as_matrix(embedder.embed(sentences))
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
        raise ValueError("Embedder returned vectors that are not unit-norm.")

    alive = list(range(len(sentences)))
    while alive:
        base.alg2_iterations += 1
        current = matrix[alive]
        residuals = [residual_norm(i, current) for i in range(len(alive))]
        smallest = min(residuals)
        if smallest >= tau_r:
            break
        pick = max(i for i, r in enumerate(residuals) if r <= smallest + TIE_TOLERANCE)
        index = alive.pop(pick)
        logger.debug("Dropping %r (residual %.4f < %.4f)", sentences[index], residuals[pick], tau_r)
        base.removed_by_alg2.append(RedundancyRemoval(sentences[index], residuals[pick]))

    base.kept = [triples[i] for i in alive]
    return graph.with_relations(graph.relations[i] for i in alive), base


# --- pipeline ----------------------------------------------------------------


def filter_scene_graph(
    graph: SceneGraph,
    stats: RelationStats,
    embedder: Embedder,
    config: FilterConfig | None = None,
) -> tuple[SceneGraph, FilterReport]:
    """Less-informative filtering followed by redundancy filtering."""
    config = config or FilterConfig()
    stage1, first = filter_less_informative(
        graph, stats, config.tau_f, smoothing=config.smoothing
    )
    stage2, second = filter_redundant(stage1, embedder, config.tau_r)
    report = FilterReport(
        len(graph.relations),
        second.kept,
        removed_by_alg1=first.removed_by_alg1,
        removed_by_alg2=second.removed_by_alg2,
        stage_order=(STAGE_LESS_INFORMATIVE, STAGE_REDUNDANT),
        alg2_iterations=second.alg2_iterations,
        tau_f=config.tau_f,
        tau_r=config.tau_r,
    )
    logger.info(
        "Filtered %d -> %d relations (%d less informative, %d redundant)",
        len(graph.relations),
        len(stage2.relations),
        len(first.removed_by_alg1),
        len(second.removed_by_alg2),
    )
    return stage2, report
