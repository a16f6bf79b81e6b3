"""Task-adaptive semantic communication simulator."""

from .corpus_ingest import RelationStats, build_relation_stats, load_scene
from .errors import SemcomError
from .semantic_model import SceneAnnotation, SceneGraph, SemanticKind, SemanticPayload
from .sg_filter import FilterConfig, FilterReport, filter_scene_graph
from .task_select import FidelityLevel, TaskKind, assemble_payload, required_semantics

__all__ = [
    "FidelityLevel",
    "FilterConfig",
    "FilterReport",
    "RelationStats",
    "SceneAnnotation",
    "SceneGraph",
    "SemanticKind",
    "SemanticPayload",
    "SemcomError",
    "TaskKind",
    "assemble_payload",
    "build_relation_stats",
    "filter_scene_graph",
    "load_scene",
    "required_semantics",
]
