"""Throughput and latency model on top of link BLER tables and payload sizes."""

from __future__ import annotations

import csv
import logging
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from enum import StrEnum
from fractions import Fraction
from pathlib import Path
from typing import TextIO

from .errors import InvalidGrant, MissingFilteredGraph, ProfileError
from .phy.ldpc import CODE_RATES
from .phy.link import BlerTable, format_snr, info_block_bits_for, padded_bits
from .semantic_model import SceneAnnotation, SceneGraph
from .source_codec import CodecConfig
from .task_select import SemanticSelection, assemble_payload

logger = logging.getLogger(__name__)

SWEEP_CSV_HEADER = (
    "kind",
    "snr_db",
    "code_rate",
    "bler",
    "avg_payload_bits",
    "images_per_second",
)


@dataclass(frozen=True)
class GrantConfig:
    n_rb: int = 2
    subcarriers_per_rb: int = 12
    symbols_per_slot: int = 14
    slots_per_second: int = 1000
    bits_per_symbol: int = 2


def symbol_rate(grant: GrantConfig) -> int:
    """Resource elements per second on the grant."""
    bad = [f.name for f in fields(grant) if getattr(grant, f.name) <= 0]
    if bad:
        raise InvalidGrant(f"grant fields must be positive: {', '.join(bad)}")
    return (
        grant.n_rb * grant.subcarriers_per_rb * grant.symbols_per_slot * grant.slots_per_second
    )


def link_goodput(
    grant: GrantConfig, rate: Fraction, bler: float, *, ideal_link: bool = False
) -> float:
    """Information bits per second; ``ideal_link`` ignores block errors."""
    if not 0.0 <= bler <= 1.0:
        raise ValueError(f"bler must be within [0, 1], got {bler}.")
    delivered = 1.0 if ideal_link else 1.0 - bler
    return symbol_rate(grant) * grant.bits_per_symbol * float(rate) * delivered


def rate_adaptation(
    snr_db: float,
    bler_table: BlerTable,
    info_block_bits: int,
    target_bler: float = 0.01,
    rates: Sequence[Fraction] = CODE_RATES,
) -> Fraction:
    """Highest rate whose BLER at ``snr_db`` meets ``target_bler``; the lowest
    rate when none does."""
    qualifying = [
        rate for rate in rates if bler_table.bler(info_block_bits, rate, snr_db) <= target_bler
    ]
    return max(qualifying) if qualifying else min(rates)


def throughput_images_per_second(payload_bits: float, goodput: float) -> float:
    if payload_bits <= 0:
        raise ValueError("payload_bits must be positive.")
    return goodput / payload_bits


# --- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class ExternalSeries:
    """A comparison series known only by its per-image size."""

    name: str
    bits: int
    info_block_bits: int


@dataclass(frozen=True)
class SweepConfig:
    snrs: tuple[float, ...] = (0.0, 2.0, 6.0, 16.0)
    grant: GrantConfig = GrantConfig()
    target_bler: float = 0.01
    rate: Fraction | None = None
    ideal_link: bool = False
    codec: CodecConfig = CodecConfig()
    workers: int = 1


@dataclass(frozen=True)
class SweepRow:
    kind: str
    snr_db: float
    code_rate: Fraction
    bler: float
    avg_payload_bits: float
    images_per_second: float

    def as_csv(self) -> list[str]:
        return [
            self.kind,
            format_snr(self.snr_db),
            str(self.code_rate),
            f"{self.bler:.6f}",
            f"{self.avg_payload_bits:.1f}",
            f"{self.images_per_second:.4f}",
        ]


def average_padded_bits(
    scenes: Sequence[SceneAnnotation],
    selection: SemanticSelection,
    codec: CodecConfig,
    filtered: Mapping[str, SceneGraph] | None = None,
) -> float:
    """Mean on-air bits per scene for one selection, segmentation padding included."""
    if not scenes:
        raise ValueError("Need at least one scene to size a payload.")
    k = info_block_bits_for(selection.kind)
    total = 0
    for scene in scenes:
        graph = None
        if selection.filtered:
            if filtered is None or scene.image_id not in filtered:
                raise MissingFilteredGraph(f"no filtered graph for scene {scene.image_id!r}")
            graph = filtered[scene.image_id]
        payload = assemble_payload(scene, [selection], graph, codec)
        total += padded_bits(payload.bit_count, k)
    return total / len(scenes)


def _row(
    name: str, k: int, bits: float, snr: float, table: BlerTable, config: SweepConfig
) -> SweepRow:
    if config.rate is not None:
        rate = config.rate
    else:
        rate = rate_adaptation(snr, table, k, config.target_bler)
    bler = table.bler(k, rate, snr)
    goodput = link_goodput(config.grant, rate, bler, ideal_link=config.ideal_link)
    return SweepRow(name, snr, rate, bler, bits, throughput_images_per_second(bits, goodput))


def sweep_throughput(
    scenes: Sequence[SceneAnnotation],
    selections: Iterable[SemanticSelection],
    bler_table: BlerTable,
    config: SweepConfig | None = None,
    *,
    filtered: Mapping[str, SceneGraph] | None = None,
    external: Iterable[ExternalSeries] = (),
) -> list[SweepRow]:
    """One row per (series, SNR): kinds first in the given order, then external series."""
    config = config or SweepConfig()
    selections = list(selections)

    def size(selection: SemanticSelection) -> float:
        return average_padded_bits(scenes, selection, config.codec, filtered)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            sizes = list(pool.map(size, selections))
    else:
        sizes = [size(selection) for selection in selections]

    series = [
        (sel.token, info_block_bits_for(sel.kind), bits)
        for sel, bits in zip(selections, sizes, strict=True)
    ]
    series += [
        (ext.name, ext.info_block_bits, float(padded_bits(ext.bits, ext.info_block_bits)))
        for ext in external
    ]
    rows = [
        _row(name, k, bits, snr, bler_table, config)
        for name, k, bits in series
        for snr in config.snrs
    ]
    logger.info("Sweep produced %d rows over %d series", len(rows), len(series))
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


# --- latency -----------------------------------------------------------------


class PipelineMode(StrEnum):
    SEQUENTIAL = "sequential"
    PIPELINED = "pipelined"


_PROFILE_KEYS = ("tau_se", "tau_ce", "tau_tx", "tau_cd", "tau_task")


@dataclass(frozen=True)
class LatencyProfile:
    """Per-stage latencies in milliseconds. ``tau_tx`` may be left for
    :func:`with_transmission` to fill in."""

    tau_se: float
    tau_cd: float
    tau_task: float
    tau_ce: float = 0.0
    tau_tx: float | None = None

    def __post_init__(self) -> None:
        for key in _PROFILE_KEYS:
            value = getattr(self, key)
            if value is not None and not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{key} must be a finite, non-negative number of ms.")

    def stages(self) -> list[float]:
        if self.tau_tx is None:
            raise ProfileError("tau_tx is unset; compute it from a payload and link first")
        return [self.tau_se, self.tau_ce, self.tau_tx, self.tau_cd, self.tau_task]

    def total(self) -> float:
        return sum(self.stages())


def transmission_latency_ms(padded_payload_bits: float, goodput: float) -> float:
    if goodput <= 0:
        raise ValueError("goodput must be positive to transmit anything.")
    return 1000.0 * padded_payload_bits / goodput


def with_transmission(
    profile: LatencyProfile, padded_payload_bits: float, goodput: float
) -> LatencyProfile:
    if profile.tau_tx is not None:
        return profile
    return replace(profile, tau_tx=transmission_latency_ms(padded_payload_bits, goodput))


def tasks_per_second(profile: LatencyProfile, mode: PipelineMode) -> float:
    stages = profile.stages()
    bottleneck = sum(stages) if mode is PipelineMode.SEQUENTIAL else max(stages)
    if bottleneck <= 0:
        raise ValueError("total latency must be positive.")
    return 1000.0 / bottleneck


def parse_latency_profile(text: str, source: str = "<profile>") -> LatencyProfile:
    """Parse ``tau_se=..,tau_ce=..,tau_tx=..,tau_cd=..,tau_task=..`` (ms).

    Entries may be split over commas or lines; ``tau_ce`` defaults to 0 and
    ``tau_tx`` may be omitted.
    """
    values: dict[str, float] = {}
    for item in re.split(r"[,\n]", text):
        item = item.split("#", 1)[0].strip()
        if not item:
            continue
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or key not in _PROFILE_KEYS:
            raise ProfileError(f"{source}: unexpected entry {item!r}")
        if key in values:
            raise ProfileError(f"{source}: {key} given twice")
        try:
            values[key] = float(raw)
        except ValueError as e:
            raise ProfileError(f"{source}: {key} is not a number: {raw.strip()!r}") from e
    missing = [key for key in ("tau_se", "tau_cd", "tau_task") if key not in values]
    if missing:
        raise ProfileError(f"{source}: missing {', '.join(missing)}")
    try:
        return LatencyProfile(**values)
    except ValueError as e:
        raise ProfileError(f"{source}: {e}") from e


def load_latency_profile(path: str | Path) -> LatencyProfile:
    return parse_latency_profile(Path(path).read_text(), str(path))
