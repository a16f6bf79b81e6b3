"""Gray-mapped QPSK, soft demodulation and the AWGN channel."""

from __future__ import annotations

import math

import numpy as np

_AMPLITUDE = 1 / math.sqrt(2)

# Below this the channel is treated as noiseless; LLRs saturate at LLR_LIMIT.
_MIN_NOISE_VARIANCE = 1e-12
LLR_LIMIT = 1e4


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Map bit pairs to unit-energy symbols; bit 0 -> +1/sqrt(2), bit 1 -> -1/sqrt(2).

    The first bit of a pair drives the in-phase part. An odd-length input is
    padded with one zero bit.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] % 2:
        pad = [(0, 0)] * (bits.ndim - 1) + [(0, 1)]
        bits = np.pad(bits, pad)
    levels = _AMPLITUDE * (1.0 - 2.0 * bits)
    return levels[..., 0::2] + 1j * levels[..., 1::2]


def noise_variance(snr_db: float) -> float:
    """Per-symbol complex noise variance for an Es/N0 of ``snr_db`` with unit Es."""
    if math.isnan(snr_db):
        raise ValueError("SNR must be a number.")
    return 10.0 ** (-snr_db / 10.0)


def qpsk_llr(symbols: np.ndarray, noise_var: float) -> np.ndarray:
    """Bit LLRs, positive meaning bit 0, interleaved (I, Q) per symbol."""
    symbols = np.asarray(symbols)
    if math.isinf(noise_var):
        return np.zeros(symbols.shape[:-1] + (2 * symbols.shape[-1],))
    scale = 2.0 * math.sqrt(2.0) / max(noise_var, _MIN_NOISE_VARIANCE)
    llr = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],))
    llr[..., 0::2] = scale * symbols.real
    llr[..., 1::2] = scale * symbols.imag
    return np.clip(llr, -LLR_LIMIT, LLR_LIMIT)


def awgn_channel(symbols: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add circularly symmetric complex Gaussian noise; ``snr_db = inf`` is noiseless."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    if snr_db == math.inf:
        return symbols.copy()
    sigma = math.sqrt(noise_variance(snr_db) / 2.0)
    noise = rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape)
    return symbols + sigma * noise
