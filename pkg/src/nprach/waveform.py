"""Single-tone preamble synthesis and the IQ file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hopping import HoppingPattern
from .numerology import DerivedNumerology, NprachConfig, derive


@dataclass(frozen=True)
class PreambleSequence:
    symbols: np.ndarray

    def __post_init__(self):
        if not np.allclose(np.abs(self.symbols), 1.0, rtol=0, atol=1e-12):
            raise ValueError("preamble symbols must have unit modulus")

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class ComplexBuffer:
    samples: np.ndarray
    sample_rate_hz: float

    def __len__(self):
        return len(self.samples)


def default_sequence(L: int) -> PreambleSequence:
    if L < 1:
        raise ValueError("L must be >= 1")
    return PreambleSequence(np.ones(L, dtype=complex))


def _tone(k: int, cfg: NprachConfig, derived: DerivedNumerology) -> np.ndarray:
    n = np.arange(-derived.cp_samples, cfg.repeats_per_group * cfg.fft_size)
    return np.exp(2j * np.pi * ((k * n) % cfg.fft_size) / cfg.fft_size)


def group_samples(m: int, k: int, u_m: complex, cfg: NprachConfig,
                  derived: DerivedNumerology | None = None) -> ComplexBuffer:
    """One symbol group: CP plus ξ repeats of a tone on subcarrier `k` of the band.

    Samples run over n = -N_cp .. ξN-1 so the CP is the tone's own
    continuation. `m` only labels the group; the tone phase restarts at n=0
    in every group.
    """
    derived = derived or derive(cfg)
    b = cfg.band_offset + k
    if not 0 <= b < cfg.fft_size:
        raise ValueError(f"subcarrier {k} (+offset {cfg.band_offset}) is outside the {cfg.fft_size}-bin grid")
    amp = np.sqrt(cfg.tx_energy_per_sample) / cfg.fft_size
    return ComplexBuffer(amp * u_m * _tone(b, cfg, derived), derived.sample_rate_hz)


def generate(cfg: NprachConfig, pattern: HoppingPattern, seq: PreambleSequence) -> ComplexBuffer:
    L = cfg.preamble_groups
    if len(pattern) != L or len(seq) != L:
        raise ValueError(
            f"length mismatch: L={L}, pattern has {len(pattern)}, sequence has {len(seq)}"
        )
    d = derive(cfg)
    bins = cfg.band_offset + np.asarray(pattern.indices)
    if np.any((bins < 0) | (bins >= cfg.fft_size)):
        raise ValueError("pattern places a tone outside the FFT grid")
    n = np.arange(-d.cp_samples, cfg.repeats_per_group * cfg.fft_size)
    phase = (bins[:, None] * n[None, :]) % cfg.fft_size
    amp = np.sqrt(cfg.tx_energy_per_sample) / cfg.fft_size
    s = amp * seq.symbols[:, None] * np.exp(2j * np.pi * phase / cfg.fft_size)
    return ComplexBuffer(s.reshape(-1), d.sample_rate_hz)


def papr_db(buf) -> float:
    s = np.asarray(getattr(buf, "samples", buf))
    if s.size == 0:
        raise ValueError("PAPR of an empty buffer is undefined")
    p = np.abs(s) ** 2
    return float(10 * np.log10(p.max() / p.mean()))


# IQ dump: <name>.iq holds interleaved little-endian float32 I/Q; <name>.json is the header.

def _header_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json") if path.suffix != ".json" else path


def dump_iq(buf: ComplexBuffer, path, config: dict | None = None) -> tuple[Path, Path]:
    path = Path(path)
    data = np.empty(2 * len(buf), dtype="<f4")
    data[0::2] = buf.samples.real
    data[1::2] = buf.samples.imag
    header = {
        "sample_rate_hz": float(buf.sample_rate_hz),
        "length": len(buf),
        "format": "interleaved float32 little-endian I/Q",
        "config": config or {},
    }
    hpath = _header_path(path)
    try:
        data.tofile(path)
        hpath.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write IQ dump {path}: {exc}") from exc
    return path, hpath


def load_iq(path) -> tuple[ComplexBuffer, dict]:
    path = Path(path)
    try:
        header = json.loads(_header_path(path).read_text(encoding="utf-8"))
        raw = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise OSError(f"cannot read IQ dump {path}: {exc}") from exc
    if raw.size != 2 * header["length"]:
        raise ValueError(f"{path}: expected {header['length']} samples, found {raw.size / 2:g}")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return ComplexBuffer(samples, header["sample_rate_hz"]), header
