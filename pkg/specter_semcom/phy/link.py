"""Monte-Carlo block error rate over LDPC + QPSK + AWGN, and code-block segmentation."""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TextIO

import numpy as np
from scipy.stats import beta

from ..errors import MissingTableEntry
from ..semantic_model import SemanticKind
from .ldpc import (
    DEFAULT_MAX_ITERATIONS,
    LIFTING_SIZES,
    LdpcCode,
    ldpc_decode,
    ldpc_encode,
    parse_rate,
    rate_match,
)
from .modulation import awgn_channel, noise_variance, qpsk_llr, qpsk_modulate

logger = logging.getLogger(__name__)

INFO_BLOCK_A = 8448
INFO_BLOCK_B = 1056

# Dense semantics ride the long block, symbolic semantics the short one.
_LONG_BLOCK_KINDS = frozenset(
    {SemanticKind.FEATURE_MAP, SemanticKind.SEGMAP, SemanticKind.COMPRESSED_IMAGE}
)

BLER_CSV_HEADER = (
    "info_block_bits",
    "code_rate",
    "snr_db",
    "blocks_sent",
    "block_errors",
    "bler",
    "seed",
)


def info_block_bits_for(kind: SemanticKind) -> int:
    return INFO_BLOCK_A if kind in _LONG_BLOCK_KINDS else INFO_BLOCK_B


def format_snr(snr_db: float) -> str:
    return "inf" if snr_db == math.inf else f"{snr_db:g}"


@dataclass(frozen=True)
class LinkConfig:
    info_block_bits: int
    code_rate: Fraction
    snr_db: float
    max_decode_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.info_block_bits not in LIFTING_SIZES:
            raise ValueError(
                f"info_block_bits must be one of {sorted(LIFTING_SIZES)}, "
                f"got {self.info_block_bits}."
            )
        object.__setattr__(self, "code_rate", parse_rate(self.code_rate))
        if self.max_decode_iterations < 1:
            raise ValueError("max_decode_iterations must be at least 1.")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number.")


@dataclass(frozen=True)
class LinkResult:
    blocks_sent: int
    block_errors: int
    seed: int

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks_sent

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Two-sided Clopper-Pearson interval for the BLER."""
        alpha = 1.0 - level
        n, k = self.blocks_sent, self.block_errors
        lower = 0.0 if k == 0 else float(beta.ppf(alpha / 2, k, n - k + 1))
        upper = 1.0 if k == n else float(beta.ppf(1 - alpha / 2, k + 1, n - k))
        return lower, upper


# --- segmentation ------------------------------------------------------------


def segment_payload(payload_bits: np.ndarray, info_block_bits: int) -> np.ndarray:
    """Split into ceil(len / K) blocks of K bits, zero-padding the last one."""
    bits = np.asarray(payload_bits, dtype=np.uint8).reshape(-1)
    if bits.size == 0:
        raise ValueError("Cannot segment an empty payload.")
    count = -(-bits.size // info_block_bits)
    blocks = np.zeros(count * info_block_bits, dtype=np.uint8)
    blocks[: bits.size] = bits
    return blocks.reshape(count, info_block_bits)


def padded_bits(bit_count: int, info_block_bits: int) -> int:
    """Bits occupied on air after segmentation, padding included."""
    return -(-bit_count // info_block_bits) * info_block_bits


# --- Monte-Carlo -------------------------------------------------------------


def _block_errors(code: LdpcCode, config: LinkConfig, indices: range) -> int:
    """Run blocks ``indices``; each draws message and noise from rng(seed, index)."""
    rngs = [np.random.default_rng([config.seed, i]) for i in indices]
    messages = np.stack([rng.integers(0, 2, code.k, dtype=np.uint8) for rng in rngs])
    symbols = qpsk_modulate(rate_match(code, ldpc_encode(code, messages), config.code_rate))
    received = np.stack(
        [awgn_channel(s, config.snr_db, rng) for s, rng in zip(symbols, rngs, strict=True)]
    )
    llrs = qpsk_llr(received, noise_variance(config.snr_db))
    decoded, _, _ = ldpc_decode(code, llrs, config.code_rate, config.max_decode_iterations)
    return int(np.any(decoded != messages, axis=1).sum())


def simulate_bler(
    config: LinkConfig, num_blocks: int, *, workers: int = 1, batch_size: int = 32
) -> LinkResult:
    """Estimate BLER over ``num_blocks`` blocks; the result does not depend on
    ``workers`` or ``batch_size``."""
    if num_blocks < 1:
        raise ValueError("num_blocks must be at least 1.")
    code = LdpcCode.for_info_bits(config.info_block_bits)
    batches = [
        range(start, min(start + batch_size, num_blocks))
        for start in range(0, num_blocks, batch_size)
    ]
    if workers <= 1:
        errors = sum(_block_errors(code, config, batch) for batch in batches)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = sum(pool.map(lambda batch: _block_errors(code, config, batch), batches))
    result = LinkResult(num_blocks, errors, config.seed)
    logger.info(
        "K=%d rate=%s snr=%s dB: %d/%d block errors",
        config.info_block_bits,
        config.code_rate,
        format_snr(config.snr_db),
        errors,
        num_blocks,
    )
    return result


# --- BLER tables -------------------------------------------------------------


TableKey = tuple[int, Fraction, float]


@dataclass
class BlerTable:
    entries: dict[TableKey, LinkResult] = field(default_factory=dict)

    def add(self, info_block_bits: int, rate: Fraction, snr_db: float, result: LinkResult) -> None:
        self.entries[(info_block_bits, Fraction(rate), float(snr_db))] = result

    def get(self, info_block_bits: int, rate: Fraction, snr_db: float) -> LinkResult:
        key = (info_block_bits, Fraction(rate), float(snr_db))
        if key not in self.entries:
            raise MissingTableEntry(
                f"no BLER for K={info_block_bits}, rate {rate}, {format_snr(snr_db)} dB"
            )
        return self.entries[key]

    def bler(self, info_block_bits: int, rate: Fraction, snr_db: float) -> float:
        return self.get(info_block_bits, rate, snr_db).bler

    @classmethod
    def constant(
        cls,
        bler: float,
        block_sizes: Iterable[int],
        rates: Iterable[Fraction],
        snrs: Iterable[float],
        blocks: int = 1000,
    ) -> BlerTable:
        """Table with the same BLER everywhere, for configured or ideal links."""
        table = cls()
        errors = round(bler * blocks)
        for k in block_sizes:
            for rate in rates:
                for snr in snrs:
                    table.add(k, rate, snr, LinkResult(blocks, errors, 0))
        return table


def compute_bler_table(
    block_sizes: Sequence[int],
    rates: Sequence[Fraction],
    snrs: Sequence[float],
    num_blocks: int,
    *,
    seed: int = 0,
    max_decode_iterations: int = DEFAULT_MAX_ITERATIONS,
    workers: int = 1,
) -> BlerTable:
    """Simulate every (K, rate, SNR) cell with the same seed."""
    table = BlerTable()
    for k in block_sizes:
        for rate in rates:
            for snr in snrs:
                config = LinkConfig(k, rate, snr, max_decode_iterations, seed)
                table.add(k, rate, snr, simulate_bler(config, num_blocks, workers=workers))
    return table


def write_bler_csv(table: BlerTable, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(BLER_CSV_HEADER)
    for (k, rate, snr), result in sorted(table.entries.items()):
        writer.writerow(
            [
                k,
                str(rate),
                format_snr(snr),
                result.blocks_sent,
                result.block_errors,
                f"{result.bler:.6f}",
                result.seed,
            ]
        )
