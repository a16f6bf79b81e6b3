"""5G-NR LDPC base graph 1: lifting, encoding, rate matching and min-sum decoding.

Circulant convention: a base entry with shift ``s`` at (row, col) connects
check ``row*Zc + i`` to variable ``col*Zc + (i + s) mod Zc``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cache, cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..errors import BaseGraphError, LengthMismatch

logger = logging.getLogger(__name__)

BG1_ROWS = 46
BG1_COLS = 68
SYSTEMATIC_COLS = 22
CORE_ROWS = 4
PUNCTURED_COLS = 2
# Non-null entries of BG1 in TS 38.212.
STANDARD_BG1_EDGES = 316
BG1_TABLE_ENV = "SEMCOM_BG1_TABLE"

LIFTING_SIZES = {1056: 48, 8448: 384}
CODE_RATES = (Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(5, 6))

MIN_SUM_SCALE = 0.75
DEFAULT_MAX_ITERATIONS = 20


def parse_rate(text: str | Fraction) -> Fraction:
    rate = Fraction(text)
    if rate not in CODE_RATES:
        raise ValueError(f"Code rate {text} is not one of {', '.join(map(str, CODE_RATES))}.")
    return rate


# --- base graph --------------------------------------------------------------


def parse_base_graph(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    try:
        matrix = np.array([[int(v) for v in row] for row in rows], dtype=np.int64)
    except ValueError as e:
        raise BaseGraphError(f"base graph has a non-integer entry: {e}") from e
    if matrix.shape != (BG1_ROWS, BG1_COLS):
        raise BaseGraphError(
            f"base graph must be {BG1_ROWS}x{BG1_COLS}, got {'x'.join(map(str, matrix.shape))}"
        )
    if np.any(matrix < -1):
        raise BaseGraphError("base graph entries must be -1 or non-negative shifts")
    return matrix


def load_base_graph(path: str | Path | None = None) -> np.ndarray:
    """Base-graph shifts from ``path``, else $SEMCOM_BG1_TABLE, else the packaged table.

    The packaged table is not the TS 38.212 one; point the environment
    variable at a verified table for bit-exact codewords.
    """
    if path is None:
        path = os.environ.get(BG1_TABLE_ENV) or None
    return _read_base_graph(None if path is None else str(path))


@cache
def _read_base_graph(path: str | None) -> np.ndarray:
    if path is None:
        source = "packaged bg1_set1.txt"
        text = resources.files(__package__).joinpath("data", "bg1_set1.txt").read_text()
    else:
        source = path
        text = Path(path).read_text()
    matrix = parse_base_graph(text)
    edges = int(np.count_nonzero(matrix >= 0))
    if edges != STANDARD_BG1_EDGES:
        logger.warning(
            "Base graph %s has %d entries, not the %d of TS 38.212 BG1; "
            "codewords will not match other 5G stacks",
            source,
            edges,
            STANDARD_BG1_EDGES,
        )
    matrix.flags.writeable = False
    return matrix


def _core_shifts(base: np.ndarray) -> tuple[int, int]:
    """Shifts (a, b) of the double-diagonal parity core.

    Column 22 must carry shift ``a`` in rows 0 and 3 and ``b`` in row 1 and
    be empty in row 2; columns 23-25 form the identity staircase.
    """
    col = base[:CORE_ROWS, SYSTEMATIC_COLS]
    staircase = base[:CORE_ROWS, SYSTEMATIC_COLS + 1 : SYSTEMATIC_COLS + CORE_ROWS]
    expected = np.array([[0, -1, -1], [0, 0, -1], [-1, 0, 0], [-1, -1, 0]])
    if col[2] != -1 or min(col[0], col[1], col[3]) < 0 or col[0] != col[3]:
        raise BaseGraphError("column 22 of the parity core is not double-diagonal")
    if not np.array_equal(staircase, expected):
        raise BaseGraphError("columns 23-25 of the parity core are not an identity staircase")
    if np.any(base[:CORE_ROWS, SYSTEMATIC_COLS + CORE_ROWS :] >= 0):
        raise BaseGraphError("core rows must not touch extension parity columns")
    ext = base[CORE_ROWS:, SYSTEMATIC_COLS + CORE_ROWS :]
    if not np.array_equal(ext, np.where(np.eye(ext.shape[0], dtype=bool), 0, -1)):
        raise BaseGraphError("extension parity columns must form an identity diagonal")
    return int(col[0]), int(col[1])


@dataclass(frozen=True, eq=False)
class LdpcCode:
    lifting_size: int
    base_graph: np.ndarray

    @classmethod
    def for_info_bits(cls, info_block_bits: int) -> LdpcCode:
        if info_block_bits not in LIFTING_SIZES:
            raise ValueError(
                f"Information block size {info_block_bits} is not one of {sorted(LIFTING_SIZES)}."
            )
        return _code_for(LIFTING_SIZES[info_block_bits])

    @property
    def k(self) -> int:
        return SYSTEMATIC_COLS * self.lifting_size

    @property
    def n_full(self) -> int:
        """Transmittable circular-buffer length (punctured columns excluded)."""
        return (BG1_COLS - PUNCTURED_COLS) * self.lifting_size

    @property
    def n_mother(self) -> int:
        return BG1_COLS * self.lifting_size

    @property
    def n_checks(self) -> int:
        return BG1_ROWS * self.lifting_size

    @cached_property
    def shifts(self) -> np.ndarray:
        """Base graph with each shift reduced mod Zc; -1 stays -1."""
        base = np.asarray(self.base_graph, dtype=np.int64)
        return np.where(base >= 0, base % self.lifting_size, -1)

    @cached_property
    def core_shifts(self) -> tuple[int, int]:
        return _core_shifts(self.shifts)

    @cached_property
    def tanner(self) -> TannerGraph:
        z = self.lifting_size
        rows, cols = np.nonzero(self.shifts >= 0)
        s = self.shifts[rows, cols]
        i = np.arange(z)
        checks = (rows[:, None] * z + i).reshape(-1)
        variables = (cols[:, None] * z + (i + s[:, None]) % z).reshape(-1)
        return TannerGraph(self.n_checks, self.n_mother, checks, variables)


@cache
def _code_for(lifting_size: int) -> LdpcCode:
    return LdpcCode(lifting_size, load_base_graph())


def parity_check_matrix(code: LdpcCode) -> sp.csr_matrix:
    """Lifted H assembled block by block from circulant permutation matrices."""
    z = code.lifting_size
    eye = np.eye(z, dtype=np.uint8)
    blocks = [
        [sp.csr_matrix(np.roll(eye, s, axis=1)) if s >= 0 else None for s in row]
        for row in code.shifts
    ]
    return sp.bmat(blocks, format="csr", dtype=np.uint8)


# --- encoding ----------------------------------------------------------------


def _circulant(x: np.ndarray, s: int) -> np.ndarray:
    """P^s x: ``out[i] = x[(i + s) mod Zc]`` along the last axis."""
    return np.roll(x, -s, axis=-1)


def ldpc_encode(code: LdpcCode, message: np.ndarray) -> np.ndarray:
    """Systematic encoding of one message (K,) or a batch (B, K).

    Returns the full 68·Zc mother codeword(s); the first K bits are the message.
    """
    msg = np.asarray(message, dtype=np.uint8)
    single = msg.ndim == 1
    msg = np.atleast_2d(msg)
    if msg.ndim != 2 or msg.shape[1] != code.k:
        raise LengthMismatch(f"message must have {code.k} bits, got shape {msg.shape}")

    z = code.lifting_size
    shifts = code.shifts
    a, b = code.core_shifts
    cw = np.zeros((msg.shape[0], BG1_COLS, z), dtype=np.uint8)
    cw[:, :SYSTEMATIC_COLS] = msg.reshape(msg.shape[0], SYSTEMATIC_COLS, z)

    def row_sum(row: int, stop: int) -> np.ndarray:
        acc = np.zeros((msg.shape[0], z), dtype=np.uint8)
        for col in np.flatnonzero(shifts[row, :stop] >= 0):
            acc ^= _circulant(cw[:, col], int(shifts[row, col]))
        return acc

    lam = [row_sum(row, SYSTEMATIC_COLS) for row in range(CORE_ROWS)]
    p22 = _circulant(lam[0] ^ lam[1] ^ lam[2] ^ lam[3], -b)
    cw[:, 22] = p22
    cw[:, 23] = lam[0] ^ _circulant(p22, a)
    cw[:, 24] = lam[1] ^ _circulant(p22, b) ^ cw[:, 23]
    cw[:, 25] = lam[3] ^ _circulant(p22, a)
    for row in range(CORE_ROWS, BG1_ROWS):
        cw[:, SYSTEMATIC_COLS + row] = row_sum(row, SYSTEMATIC_COLS + CORE_ROWS)

    out = cw.reshape(msg.shape[0], -1)
    return out[0] if single else out


# --- rate matching -----------------------------------------------------------


def rate_match_length(k: int, rate: Fraction) -> int:
    """E = K / rate rounded half-up to an even integer."""
    return 2 * int(Fraction(k) / (2 * rate) + Fraction(1, 2))


def rate_match(code: LdpcCode, codeword: np.ndarray, rate: Fraction) -> np.ndarray:
    """Read E bits circularly from the buffer that starts after the 2·Zc punctured bits."""
    buffer = np.asarray(codeword)[..., PUNCTURED_COLS * code.lifting_size :]
    if buffer.shape[-1] != code.n_full:
        raise LengthMismatch(
            f"codeword must have {code.n_mother} bits, got {np.asarray(codeword).shape[-1]}"
        )
    e = rate_match_length(code.k, rate)
    return np.take(buffer, np.arange(e) % code.n_full, axis=-1)


def rate_recover(code: LdpcCode, llrs: np.ndarray) -> np.ndarray:
    """Map E received LLRs back onto the mother codeword; unsent positions get 0."""
    llrs = np.asarray(llrs, dtype=np.float64)
    out = np.zeros(llrs.shape[:-1] + (code.n_mother,))
    offset = PUNCTURED_COLS * code.lifting_size
    for start in range(0, llrs.shape[-1], code.n_full):
        chunk = llrs[..., start : start + code.n_full]
        out[..., offset : offset + chunk.shape[-1]] += chunk
    return out


# --- decoding ----------------------------------------------------------------


class TannerGraph:
    """Edge lists of a binary parity-check matrix, sorted by check."""

    def __init__(
        self, n_checks: int, n_vars: int, checks: np.ndarray, variables: np.ndarray
    ) -> None:
        order = np.argsort(checks, kind="stable")
        self.n_checks = n_checks
        self.n_vars = n_vars
        self.check_of_edge = np.asarray(checks)[order]
        self.var_of_edge = np.asarray(variables)[order]
        check_degree = np.bincount(self.check_of_edge, minlength=n_checks)
        var_degree = np.bincount(self.var_of_edge, minlength=n_vars)
        if (
            check_degree.size == 0
            or var_degree.size == 0
            or check_degree.min() < 2
            or var_degree.min() < 1
        ):
            raise BaseGraphError("every check needs two edges and every variable one")
        self.check_starts = np.concatenate([[0], np.cumsum(check_degree)[:-1]])
        self.var_order = np.argsort(self.var_of_edge, kind="stable")
        self.var_starts = np.concatenate([[0], np.cumsum(var_degree)[:-1]])

    @classmethod
    def from_dense(cls, h: np.ndarray) -> TannerGraph:
        h = np.asarray(h)
        checks, variables = np.nonzero(h)
        return cls(h.shape[0], h.shape[1], checks, variables)

    def syndrome_ok(self, hard: np.ndarray) -> np.ndarray:
        bits = hard[:, self.var_of_edge].astype(np.int32)
        return ~np.any(np.add.reduceat(bits, self.check_starts, axis=1) & 1, axis=1)

    def _check_update(self, v2c: np.ndarray, scale: float) -> np.ndarray:
        starts, owner = self.check_starts, self.check_of_edge
        mag = np.abs(v2c)
        negative = (v2c < 0).astype(np.int32)
        min1 = np.minimum.reduceat(mag, starts, axis=1)
        is_min = mag == min1[:, owner]
        ties = np.add.reduceat(is_min.astype(np.int32), starts, axis=1)
        min2 = np.minimum.reduceat(np.where(is_min, np.inf, mag), starts, axis=1)
        min2 = np.where(ties > 1, min1, min2)
        others = np.where(is_min, min2[:, owner], min1[:, owner])
        parity = np.add.reduceat(negative, starts, axis=1) & 1
        sign = 1 - 2 * (parity[:, owner] ^ negative)
        return scale * others * sign

    def _var_totals(self, channel: np.ndarray, c2v: np.ndarray) -> np.ndarray:
        incoming = np.add.reduceat(c2v[:, self.var_order], self.var_starts, axis=1)
        return channel + incoming

    def decode(
        self,
        llrs: np.ndarray,
        max_iter: int = DEFAULT_MAX_ITERATIONS,
        scale: float = MIN_SUM_SCALE,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Normalized min-sum with a flooding schedule over a (B, n_vars) batch.

        A block stops once every check is satisfied and no posterior is
        exactly zero. Returns hard decisions (B, n_vars), converged flags and
        the iterations each block used.
        """
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1.")
        channel = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
        if channel.shape[1] != self.n_vars:
            raise LengthMismatch(f"expected {self.n_vars} LLRs per block, got {channel.shape[1]}")
        blocks = channel.shape[0]
        bits = (channel < 0).astype(np.uint8)
        converged = np.zeros(blocks, dtype=bool)
        iterations = np.zeros(blocks, dtype=np.int64)
        v2c = channel[:, self.var_of_edge].copy()

        active = np.arange(blocks)
        for it in range(1, max_iter + 1):
            c2v = self._check_update(v2c[active], scale)
            total = self._var_totals(channel[active], c2v)
            hard = total < 0
            done = self.syndrome_ok(hard) & np.all(total != 0, axis=1)
            bits[active] = hard
            iterations[active] = it
            converged[active] = done
            v2c[active] = total[:, self.var_of_edge] - c2v
            active = active[~done]
            if active.size == 0:
                break
        logger.debug(
            "Decoded %d blocks: %d converged, max %d iterations",
            blocks,
            int(converged.sum()),
            int(iterations.max(initial=0)),
        )
        return bits, converged, iterations


def ldpc_decode(
    code: LdpcCode,
    llrs: np.ndarray,
    rate: Fraction,
    max_iter: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode E rate-matched LLRs per block (positive means bit 0).

    Returns the first K hard-decision bits, converged flags and iterations,
    unbatched when ``llrs`` is one-dimensional.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    single = llrs.ndim == 1
    llrs = np.atleast_2d(llrs)
    e = rate_match_length(code.k, rate)
    if llrs.shape[1] != e:
        raise LengthMismatch(f"rate {rate} expects {e} LLRs per block, got {llrs.shape[1]}")
    bits, converged, iterations = code.tanner.decode(rate_recover(code, llrs), max_iter)
    message = bits[:, : code.k]
    if single:
        return message[0], converged[0], iterations[0]
    return message, converged, iterations
