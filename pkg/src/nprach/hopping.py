"""Multi-level single-tone hopping pattern.

Within each unit of four symbol groups the tone hops by one subcarrier, then
six, then one back in the mirrored direction. Between units the whole band
is shifted by a cell-common pseudo-random offset, so preambles that start on
different subcarriers never collide.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .numerology import ConfigError, NprachConfig

BAND = 12
GOLD_WARMUP = 1600


@lru_cache(maxsize=256)
def _gold_bits_cached(cell_id: int, count: int) -> tuple[int, ...]:
    total = count + GOLD_WARMUP
    x1 = np.zeros(total + 31, dtype=np.uint8)
    x2 = np.zeros(total + 31, dtype=np.uint8)
    x1[0] = 1
    seed = cell_id & 0x7FFFFFFF
    x2[:31] = [(seed >> i) & 1 for i in range(31)]
    for n in range(total):
        x1[n + 31] = x1[n + 3] ^ x1[n]
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n]
    return tuple(int(b) for b in (x1[GOLD_WARMUP:total] ^ x2[GOLD_WARMUP:total]))


def gold_bits(cell_id: int, count: int) -> np.ndarray:
    """Length-31 Gold sequence bits seeded by `cell_id`.

    The first register starts at 1 and the second holds the 31 low bits of
    `cell_id`; the first 1600 outputs are discarded.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.array(_gold_bits_cached(int(cell_id), int(count)), dtype=np.uint8)


@lru_cache(maxsize=256)
def _offsets(cell_id: int, units: int) -> tuple[int, ...]:
    bits = _gold_bits_cached(cell_id, 4 * units)
    f = [0]
    for t in range(1, units):
        word = sum(bits[4 * t + k] << k for k in range(4))
        f.append((f[-1] + 1 + word % 11) % BAND)
    return tuple(f)


def block_offset(t: int, cell_id: int) -> int:
    """Cell-common band shift applied to hop unit `t` (never zero between units)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    # round up so neighbouring t share one cached prefix
    units = max(32, 1 << t.bit_length())
    return _offsets(int(cell_id), units)[t]


def block_offsets(units: int, cell_id: int) -> np.ndarray:
    return np.array(_offsets(int(cell_id), int(units)), dtype=np.int64)


def _inner(base: int, p: int) -> int:
    first = base + 1 if base % 2 == 0 else base - 1
    if p == 0:
        return base
    if p == 1:
        return first
    second = first + 6 if first < 6 else first - 6
    if p == 2:
        return second
    return second - (first - base)


def subcarrier_index(m: int, n0: int, cell_id: int) -> int:
    if not 0 <= n0 < BAND:
        raise ValueError(f"n0 must lie in [0, {BAND})")
    if m < 0:
        raise ValueError("m must be >= 0")
    t, p = divmod(m, 4)
    return _inner((n0 + block_offset(t, cell_id)) % BAND, p)


@dataclass(frozen=True)
class HoppingPattern:
    indices: np.ndarray
    start_subcarrier: int
    cell_id: int

    def __len__(self):
        return len(self.indices)

    def to_text(self) -> str:
        return "".join(f"{m}, {k}\n" for m, k in enumerate(self.indices))

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def pattern_from_offsets(n0: int, offsets, cell_id: int = 0) -> HoppingPattern:
    """Build a pattern from explicit per-unit offsets (used to force outer hops in tests)."""
    idx = [_inner((n0 + f) % BAND, p) for f in offsets for p in range(4)]
    return HoppingPattern(np.array(idx, dtype=np.int64), n0, cell_id)


def full_pattern(cfg: NprachConfig, n0: int) -> HoppingPattern:
    if cfg.band_subcarriers != BAND:
        raise ConfigError(f"hopping requires a {BAND}-subcarrier band, got {cfg.band_subcarriers}")
    if not 0 <= n0 < BAND:
        raise ValueError(f"n0 must lie in [0, {BAND})")
    units = cfg.preamble_groups // 4
    return pattern_from_offsets(n0, _offsets(cfg.cell_id, units), cfg.cell_id)


def check_invariants(pattern: HoppingPattern) -> list[str]:
    """List violated hop-structure invariants (empty when the pattern conforms)."""
    idx = np.asarray(pattern.indices)
    errs = []
    if idx.size % 4:
        errs.append("length is not a multiple of 4")
        return errs
    u = idx.reshape(-1, 4)
    d1, d2, d3 = u[:, 1] - u[:, 0], u[:, 2] - u[:, 1], u[:, 3] - u[:, 2]
    if np.any(np.abs(d1) != 1):
        errs.append("first hop is not one subcarrier")
    if np.any(np.abs(d2) != 6):
        errs.append("second hop is not six subcarriers")
    if np.any(d3 != -d1):
        errs.append("third hop does not mirror the first")
    if np.any((idx < 0) | (idx >= BAND)):
        errs.append("index outside the band")
    return errs
