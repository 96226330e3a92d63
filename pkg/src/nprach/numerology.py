"""Configuration and derived timing constants for the NPRACH simulator."""

from __future__ import annotations

import enum
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised when a configuration or scenario violates its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class CpKind(str, enum.Enum):
    LONG = "long"
    SHORT = "short"


# CP length as a fraction of the N-sample symbol: 266.7 us = 64/240 kHz, 66.7 us = 16/240 kHz.
_CP_FRACTION = {CpKind.LONG: (1, 1), CpKind.SHORT: (1, 4)}


@dataclass(frozen=True)
class NprachConfig:
    fft_size: int = 64
    subcarrier_spacing_hz: float = 3750.0
    system_bandwidth_hz: float = 180e3
    cp_kind: CpKind = CpKind.LONG
    repeats_per_group: int = 5
    preamble_groups: int = 128
    band_subcarriers: int = 12
    band_offset: int = 0
    cell_id: int = 0
    tx_energy_per_sample: float = 1.0

    def __post_init__(self):
        if not isinstance(self.cp_kind, CpKind):
            try:
                object.__setattr__(self, "cp_kind", CpKind(str(self.cp_kind).lower()))
            except ValueError:
                raise ConfigError(f"cp_kind must be 'long' or 'short', got {self.cp_kind!r}") from None

    def replace(self, **changes) -> NprachConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cp_kind"] = self.cp_kind.value
        return d


@dataclass(frozen=True)
class DerivedNumerology:
    sample_rate_hz: float
    cp_samples: int
    group_samples: int
    preamble_samples: int
    preamble_duration_s: float

    @property
    def cp_duration_s(self) -> float:
        return self.cp_samples / self.sample_rate_hz


def validate(cfg: NprachConfig) -> list[str]:
    """Return every violated invariant of `cfg`; an empty list means valid."""
    errs = []
    n = cfg.fft_size
    if n < 1 or n & (n - 1):
        errs.append(f"fft_size {n} is not a power of two")
    if cfg.subcarrier_spacing_hz <= 0 or cfg.system_bandwidth_hz <= 0:
        errs.append("subcarrier spacing and system bandwidth must be positive")
    elif n < cfg.system_bandwidth_hz / cfg.subcarrier_spacing_hz:
        errs.append(
            f"fft_size {n} smaller than the {cfg.system_bandwidth_hz / cfg.subcarrier_spacing_hz:g} "
            "usable subcarriers"
        )
    if cfg.preamble_groups < 4 or cfg.preamble_groups % 4:
        errs.append(f"L mod 4 ≠ 0 (preamble_groups={cfg.preamble_groups})")
    if cfg.repeats_per_group < 1:
        errs.append("repeats_per_group must be >= 1")
    if cfg.band_subcarriers < 1:
        errs.append("band_subcarriers must be >= 1")
    if cfg.band_offset < 0 or cfg.band_offset + cfg.band_subcarriers > n:
        errs.append(
            f"band exceeds grid (band_offset={cfg.band_offset}, "
            f"band_subcarriers={cfg.band_subcarriers}, fft_size={n})"
        )
    if cfg.cell_id < 0:
        errs.append("cell_id must be non-negative")
    if cfg.tx_energy_per_sample <= 0:
        errs.append("tx_energy_per_sample must be positive")
    num, den = _CP_FRACTION[cfg.cp_kind]
    if (n * num) % den:
        errs.append(f"{cfg.cp_kind.value} CP is not an integer number of samples at fft_size {n}")
    return errs


def check(cfg: NprachConfig) -> NprachConfig:
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def derive(cfg: NprachConfig) -> DerivedNumerology:
    fs = cfg.fft_size * cfg.subcarrier_spacing_hz
    num, den = _CP_FRACTION[cfg.cp_kind]
    n_cp = cfg.fft_size * num // den
    group = n_cp + cfg.repeats_per_group * cfg.fft_size
    total = cfg.preamble_groups * group
    return DerivedNumerology(
        sample_rate_hz=fs,
        cp_samples=n_cp,
        group_samples=group,
        preamble_samples=total,
        preamble_duration_s=total / fs,
    )


_FIELD_TYPES = {
    "fft_size": int,
    "subcarrier_spacing_hz": float,
    "system_bandwidth_hz": float,
    "cp_kind": str,
    "repeats_per_group": int,
    "preamble_groups": int,
    "band_subcarriers": int,
    "band_offset": int,
    "cell_id": int,
    "tx_energy_per_sample": float,
}
CONFIG_KEYS = frozenset(f.name for f in fields(NprachConfig))


def coerce(key: str, value, types: dict):
    """Convert a parsed file value to the declared field type."""
    typ = types[key]
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def config_from_mapping(data: dict, base: NprachConfig | None = None) -> NprachConfig:
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {k: coerce(k, v, _FIELD_TYPES) for k, v in data.items()}
    return check((base or NprachConfig()).replace(**kwargs))


def read_toml(path) -> dict:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def load_config(path) -> NprachConfig:
    """Read a flat TOML file of NprachConfig fields. Unknown keys are errors."""
    data = read_toml(path)
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: config must be flat, found table(s) {', '.join(nested)}")
    return config_from_mapping(data)


def dump_config(cfg: NprachConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        lines.append(f'{k} = "{v}"' if isinstance(v, str) else f"{k} = {v!r}")
    return "\n".join(lines) + "\n"
