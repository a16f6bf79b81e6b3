"""Command-line front end: ``specter-semcom <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
from collections.abc import Callable, Iterator
from fractions import Fraction
from pathlib import Path
from typing import TextIO

from .corpus_ingest import (
    RelationStats,
    build_relation_stats,
    load_corpus,
    load_scene,
    load_stats,
    persist_stats,
    scene_to_document,
)
from .embedding import EmbedderBackend, EmbedderConfig, make_embedder
from .errors import SemcomError
from .perf_model import (
    GrantConfig,
    PipelineMode,
    SweepConfig,
    link_goodput,
    load_latency_profile,
    rate_adaptation,
    sweep_throughput,
    tasks_per_second,
    with_transmission,
    write_sweep_csv,
)
from .phy import CODE_RATES, compute_bler_table, info_block_bits_for, padded_bits, parse_rate
from .phy.link import BlerTable, write_bler_csv
from .semantic_model import SceneAnnotation, SceneGraph
from .sg_filter import FilterConfig, FilterReport, filter_scene_graph
from .source_codec import CodecConfig, payload_metrics, unpack_payload
from .task_select import (
    FidelityLevel,
    SemanticSelection,
    TaskKind,
    assemble_payload,
    load_policy,
    parse_selection,
    required_semantics,
)

logger = logging.getLogger(__name__)

RANDOMIZED = frozenset({"filter", "encode", "simulate", "sweep", "latency"})
_PATH_FLAGS = ("corpus", "scene", "stats", "embeddings_file", "policy", "profile")


# --- argument parsing --------------------------------------------------------


def _snr_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}") from e
    if not values or any(math.isnan(v) for v in values):
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}")
    return values


def _kind_list(text: str) -> list[SemanticSelection]:
    try:
        return [parse_selection(token) for token in text.split(",") if token.strip()]
    except SemcomError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(kind: type) -> Callable[[str], int | float]:
    def parse(text: str) -> int | float:
        try:
            value = kind(text)
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from e
        if not value >= 0:
            raise argparse.ArgumentTypeError(f"expected a non-negative value, got {text}")
        return value

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specter-semcom",
        description="Task-adaptive semantic communication simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help_text, description=help_text)

    def embedder_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--stats", type=Path, help="relation statistics file from `ingest`")
        p.add_argument("--embedder", choices=[b.value for b in EmbedderBackend], default="hash")
        p.add_argument("--embeddings-file", type=Path)
        p.add_argument("--endpoint", help="remote embedding URL (else $SEMCOM_EMBED_URL)")
        p.add_argument("--dim", type=_positive_int, default=384)
        p.add_argument("--tau-f", type=float, default=0.8)
        p.add_argument("--tau-r", type=float, default=0.8)

    def seed_flag(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)

    def link_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--snrs", type=_snr_list, default=[0.0, 2.0, 6.0, 16.0])
        p.add_argument("--rate", choices=["auto", *map(str, CODE_RATES)], default="auto")
        p.add_argument("--blocks", type=_positive_int, default=2000)
        p.add_argument("--workers", type=_positive_int, default=1, help="simulation threads")

    def codec_flags(p: argparse.ArgumentParser) -> None:
        size = p.add_mutually_exclusive_group()
        size.add_argument(
            "--compressed-image-bpp",
            type=_non_negative(float),
            help="size of the compressed_image kind in bits per pixel",
        )
        size.add_argument(
            "--compressed-image-bytes",
            type=_non_negative(int),
            help="fixed size of the compressed_image kind",
        )

    p = add("ingest", "Build relation statistics from an annotation corpus.")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add("filter", "Filter one scene graph and report what was removed.")
    p.add_argument("--scene", type=Path, required=True)
    embedder_flags(p)
    seed_flag(p)
    p.add_argument("--report", type=Path, help="write the filter report as JSON")
    p.add_argument("--out", type=Path, help="write the filtered scene as JSON")

    p = add("select", "Print the semantic kinds a task needs.")
    p.add_argument("--task", choices=[t.value for t in TaskKind], required=True)
    p.add_argument("--fidelity", choices=[f.value for f in FidelityLevel], default="standard")
    p.add_argument("--policy", type=Path, help="policy override file")

    p = add("encode", "Assemble a scene's payload for a task or explicit kinds.")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--kinds", type=_kind_list)
    p.add_argument("--task", choices=[t.value for t in TaskKind])
    p.add_argument("--fidelity", choices=[f.value for f in FidelityLevel], default="standard")
    p.add_argument("--policy", type=Path)
    embedder_flags(p)
    codec_flags(p)
    seed_flag(p)
    p.add_argument("--out", type=Path, help="write the payload bytes")
    p.add_argument("--report", type=Path, help="write payload metrics as JSON")

    p = add("simulate", "Monte-Carlo BLER of the LDPC/QPSK/AWGN link.")
    p.add_argument("--kinds", type=_kind_list, help="pick code-block classes (default sg)")
    link_flags(p)
    seed_flag(p)
    p.add_argument("--out", type=Path, help="CSV output (default stdout)")

    p = add("sweep", "Throughput per semantic kind over an SNR grid.")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--kinds", type=_kind_list, required=True)
    link_flags(p)
    p.add_argument("--target-bler", type=float, default=0.01)
    p.add_argument("--ideal-link", action="store_true")
    p.add_argument("--grant-rb", type=_positive_int, default=2)
    embedder_flags(p)
    codec_flags(p)
    seed_flag(p)
    p.add_argument("--out", type=Path, help="CSV output (default stdout)")
    p.add_argument("--report", type=Path, help="write the BLER table used as CSV")

    p = add("latency", "Tasks per second from a latency profile.")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--mode", choices=[m.value for m in PipelineMode], default="sequential")
    p.add_argument("--scene", type=Path, help="payload source when tau_tx is missing")
    p.add_argument("--kinds", type=_kind_list)
    link_flags(p)
    p.add_argument("--target-bler", type=float, default=0.01)
    p.add_argument("--ideal-link", action="store_true")
    p.add_argument("--grant-rb", type=_positive_int, default=2)
    embedder_flags(p)
    codec_flags(p)
    seed_flag(p)
    return parser


# --- shared plumbing ---------------------------------------------------------


@contextlib.contextmanager
def _output(path: Path | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with path.open("w", newline="") as stream:
            yield stream


def _embedder_config(args: argparse.Namespace) -> EmbedderConfig:
    return EmbedderConfig(
        backend=EmbedderBackend(args.embedder),
        dim=args.dim,
        seed=args.seed,
        path=str(args.embeddings_file) if args.embeddings_file else None,
        endpoint_url=args.endpoint,
    )


def _codec_config(args: argparse.Namespace) -> CodecConfig:
    return CodecConfig(
        compressed_image_bytes=args.compressed_image_bytes,
        compressed_image_bpp=args.compressed_image_bpp,
    )


def _read_scene(path: Path) -> SceneAnnotation:
    return load_scene(path.read_bytes())


def _stats(args: argparse.Namespace, scenes: list[SceneAnnotation]) -> RelationStats:
    if args.stats is not None:
        return load_stats(args.stats)
    logger.info("No --stats given; counting relations over the %d input scene(s)", len(scenes))
    return build_relation_stats(scenes)


def _filter_all(
    args: argparse.Namespace, scenes: list[SceneAnnotation]
) -> dict[str, tuple[SceneGraph, FilterReport]]:
    stats = _stats(args, scenes)
    embedder = make_embedder(_embedder_config(args))
    config = FilterConfig(tau_f=args.tau_f, tau_r=args.tau_r)
    return {
        scene.image_id: filter_scene_graph(scene.graph, stats, embedder, config)
        for scene in scenes
    }


def _needs_filtered(selections: list[SemanticSelection]) -> bool:
    return any(selection.filtered for selection in selections)


def _rates(args: argparse.Namespace) -> tuple[Fraction, ...]:
    return CODE_RATES if args.rate == "auto" else (parse_rate(args.rate),)


def _bler_table(
    args: argparse.Namespace, block_sizes: set[int], rates: tuple[Fraction, ...]
) -> BlerTable:
    if getattr(args, "ideal_link", False):
        return BlerTable.constant(0.0, block_sizes, rates, args.snrs)
    return compute_bler_table(
        sorted(block_sizes), rates, args.snrs, args.blocks, seed=args.seed, workers=args.workers
    )


# --- subcommands -------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> None:
    scenes = load_corpus(args.corpus)
    stats = build_relation_stats(scenes)
    persist_stats(stats, args.out)
    print(f"scenes={stats.corpus_size} triples={len(stats.triple_counts)}")


def cmd_filter(args: argparse.Namespace) -> None:
    scene = _read_scene(args.scene)
    graph, report = _filter_all(args, [scene])[scene.image_id]
    document = report.to_dict() | {"image_id": scene.image_id, "seed": args.seed}
    if args.report is not None:
        args.report.write_text(json.dumps(document, indent=2) + "\n")
    if args.out is not None:
        filtered = SceneAnnotation(scene.image_id, scene.width, scene.height, graph, scene.layouts)
        args.out.write_bytes(scene_to_document(filtered))
    for triple in report.kept:
        print(" ".join(triple))


def _policy_selections(args: argparse.Namespace) -> list[SemanticSelection]:
    policy = load_policy(args.policy) if args.policy is not None else None
    return required_semantics(TaskKind(args.task), FidelityLevel(args.fidelity), policy)


def cmd_select(args: argparse.Namespace) -> None:
    print("+".join(selection.token for selection in _policy_selections(args)))


def cmd_encode(args: argparse.Namespace) -> None:
    if (args.kinds is None) == (args.task is None):
        raise ValueError("encode needs exactly one of --kinds or --task")
    selections = args.kinds if args.kinds is not None else _policy_selections(args)
    scene = _read_scene(args.scene)
    filtered = None
    if _needs_filtered(selections):
        filtered, _ = _filter_all(args, [scene])[scene.image_id]
    payload = assemble_payload(scene, selections, filtered, _codec_config(args))
    metrics = payload_metrics(payload, scene.width, scene.height)
    if args.out is not None:
        args.out.write_bytes(payload.bits)
    if args.report is not None:
        document = {
            "image_id": scene.image_id,
            "kinds": [selection.token for selection in selections],
            "bit_count": payload.bit_count,
            "sections": [
                {"kind": section.kind.value, "bits": section.bit_count}
                for section in unpack_payload(payload)
            ],
            "bpp": metrics.bpp,
            "compression_rate": metrics.compression_rate,
            "seed": args.seed,
        }
        args.report.write_text(json.dumps(document, indent=2) + "\n")
    print(
        f"bits={payload.bit_count} bpp={metrics.bpp:.6f} "
        f"compression_rate={metrics.compression_rate:.6f}"
    )


def cmd_simulate(args: argparse.Namespace) -> None:
    selections = args.kinds or [parse_selection("sg")]
    block_sizes = {info_block_bits_for(selection.kind) for selection in selections}
    table = _bler_table(args, block_sizes, _rates(args))
    with _output(args.out) as stream:
        write_bler_csv(table, stream)


def cmd_sweep(args: argparse.Namespace) -> None:
    scenes = load_corpus(args.corpus)
    filtered = None
    if _needs_filtered(args.kinds):
        filtered = {key: graph for key, (graph, _) in _filter_all(args, scenes).items()}
    rates = _rates(args)
    table = _bler_table(args, {info_block_bits_for(s.kind) for s in args.kinds}, rates)
    config = SweepConfig(
        snrs=tuple(args.snrs),
        grant=GrantConfig(n_rb=args.grant_rb),
        target_bler=args.target_bler,
        rate=None if args.rate == "auto" else rates[0],
        ideal_link=args.ideal_link,
        codec=_codec_config(args),
        workers=args.workers,
    )
    rows = sweep_throughput(scenes, args.kinds, table, config, filtered=filtered)
    with _output(args.out) as stream:
        write_sweep_csv(rows, stream)
    if args.report is not None:
        with args.report.open("w", newline="") as stream:
            write_bler_csv(table, stream)


def cmd_latency(args: argparse.Namespace) -> None:
    profile = load_latency_profile(args.profile)
    if profile.tau_tx is None:
        if args.scene is None or not args.kinds:
            raise ValueError("the profile has no tau_tx; pass --scene and --kinds to compute it")
        scene = _read_scene(args.scene)
        filtered = None
        if _needs_filtered(args.kinds):
            filtered, _ = _filter_all(args, [scene])[scene.image_id]
        payload = assemble_payload(scene, args.kinds, filtered, _codec_config(args))
        k = max(info_block_bits_for(selection.kind) for selection in args.kinds)
        snr = args.snrs[0]
        rates = _rates(args)
        table = _bler_table(args, {k}, rates)
        if args.rate == "auto":
            rate = rate_adaptation(snr, table, k, args.target_bler)
        else:
            rate = rates[0]
        bler = table.bler(k, rate, snr)
        grant = GrantConfig(n_rb=args.grant_rb)
        goodput = link_goodput(grant, rate, bler, ideal_link=args.ideal_link)
        profile = with_transmission(profile, padded_bits(payload.bit_count, k), goodput)
        logger.info("tau_tx=%.3f ms at %s dB, rate %s", profile.tau_tx, snr, rate)
    print(f"{tasks_per_second(profile, PipelineMode(args.mode)):.4f}")


COMMANDS = {
    "ingest": cmd_ingest,
    "filter": cmd_filter,
    "select": cmd_select,
    "encode": cmd_encode,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "latency": cmd_latency,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for flag in _PATH_FLAGS:
        path = getattr(args, flag, None)
        if path is not None and not path.exists():
            parser.error(f"--{flag.replace('_', '-')}: {path} does not exist")

    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    if args.command in RANDOMIZED:
        print(f"seed={args.seed}", file=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (SemcomError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0
