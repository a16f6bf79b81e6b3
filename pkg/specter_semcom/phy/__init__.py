from .ldpc import (
    CODE_RATES,
    LIFTING_SIZES,
    LdpcCode,
    TannerGraph,
    ldpc_decode,
    ldpc_encode,
    parity_check_matrix,
    parse_rate,
    rate_match,
    rate_match_length,
    rate_recover,
)
from .link import (
    INFO_BLOCK_A,
    INFO_BLOCK_B,
    BlerTable,
    LinkConfig,
    LinkResult,
    compute_bler_table,
    info_block_bits_for,
    padded_bits,
    segment_payload,
    simulate_bler,
    write_bler_csv,
)
from .modulation import awgn_channel, noise_variance, qpsk_llr, qpsk_modulate

__all__ = [
    "CODE_RATES",
    "INFO_BLOCK_A",
    "INFO_BLOCK_B",
    "LIFTING_SIZES",
    "BlerTable",
    "LdpcCode",
    "LinkConfig",
    "LinkResult",
    "TannerGraph",
    "awgn_channel",
    "compute_bler_table",
    "info_block_bits_for",
    "ldpc_decode",
    "ldpc_encode",
    "noise_variance",
    "padded_bits",
    "parity_check_matrix",
    "parse_rate",
    "qpsk_llr",
    "qpsk_modulate",
    "rate_match",
    "rate_match_length",
    "rate_recover",
    "segment_payload",
    "simulate_bler",
    "write_bler_csv",
]
