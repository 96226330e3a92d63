"""Impaired uplink channel: delay, fading, residual CFO with drift, AWGN.

Random streams are split per trial as ``SeedSequence([seed, antenna, role])``
with role 1 for fading and role 2 for noise, so every antenna's draws are
reproducible and independent of the others.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .numerology import ConfigError, NprachConfig, derive
from .waveform import ComplexBuffer, dump_iq

FADING_ROLE = 1
NOISE_ROLE = 2
JAKES_SCATTERERS = 64


class Fading(str, enum.Enum):
    NONE = "none"
    FLAT_RAYLEIGH = "flat_rayleigh"
    TYPICAL_URBAN = "typical_urban"


class SnrReference(str, enum.Enum):
    # noise measured in one subcarrier (B Hz), the usual link-budget convention
    SUBCARRIER = "subcarrier"
    # noise measured over the full N*B sample bandwidth
    SAMPLE = "sample"


@dataclass(frozen=True)
class ChannelConfig:
    delay_samples: float = 0.0
    cfo_hz: float = 0.0
    drift_hz_per_s: float = 0.0
    snr_db: float = np.inf
    fading: Fading = Fading.NONE
    doppler_hz: float = 1.0
    n_rx: int = 1
    seed: int = 0
    snr_reference: SnrReference = SnrReference.SUBCARRIER

    def __post_init__(self):
        object.__setattr__(self, "fading", Fading(self.fading))
        object.__setattr__(self, "snr_reference", SnrReference(self.snr_reference))
        if self.n_rx < 1:
            raise ConfigError("n_rx must be >= 1")
        if self.delay_samples < 0:
            raise ConfigError("delay_samples must be >= 0")
        if self.doppler_hz < 0:
            raise ConfigError("doppler_hz must be >= 0")


@dataclass(frozen=True)
class RxBuffers:
    samples: np.ndarray          # (n_rx, n)
    sample_rate_hz: float
    fading: np.ndarray = field(repr=False, default=None)  # realized gain per antenna, (n_rx, n)

    @property
    def n_rx(self) -> int:
        return self.samples.shape[0]

    def antenna(self, i: int) -> ComplexBuffer:
        return ComplexBuffer(self.samples[i], self.sample_rate_hz)

    def dump(self, stem, config: dict | None = None) -> list[Path]:
        stem = Path(stem)
        out = []
        for i in range(self.n_rx):
            p, _ = dump_iq(self.antenna(i), stem.with_name(f"{stem.name}_rx{i}.iq"), config)
            out.append(p)
        return out


def load_tap_table(path=None) -> tuple[np.ndarray, np.ndarray]:
    """Read a "delay_us, relative_power_db" table; defaults to the shipped TU profile."""
    if path is None:
        text = resources.files("nprach").joinpath("data/tu12.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            delay, power = (float(x) for x in line.split(","))
            rows.append((delay, power))
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def apply_delay(buf: ComplexBuffer, D: float, max_delay: float | None = None) -> ComplexBuffer:
    """Delay by `D` samples; the head is zero-filled.

    Integer delays are plain shifts. Fractional delays apply the linear
    phase exp(-j 2 pi f D) to the FFT of the whole buffer, which is an ideal
    band-limited (circular) delay; the wrapped-around head is then zeroed.
    """
    if D < 0 or (max_delay is not None and D >= max_delay):
        raise ValueError(f"delay {D} outside [0, {max_delay})")
    x = np.asarray(buf.samples)
    if D == 0:
        return buf
    n = len(x)
    whole = int(np.floor(D))
    if D == whole:
        y = np.zeros_like(x, dtype=complex)
        y[whole:] = x[: n - whole]
    else:
        f = np.fft.fftfreq(n)
        y = np.fft.ifft(np.fft.fft(x) * np.exp(-2j * np.pi * f * D))
        y[:whole] = 0
    return ComplexBuffer(y, buf.sample_rate_hz)


def _jakes(power: float, doppler_hz: float, n_samples: int, sample_rate: float, rng,
           count: int = 1) -> np.ndarray:
    m = JAKES_SCATTERERS
    alpha = rng.uniform(0, 2 * np.pi, (count, m))
    w = 2 * np.pi * doppler_hz * np.cos(alpha) / sample_rate   # rad/sample
    # complex Gaussian weights (equal power on average) make every marginal exactly Rayleigh;
    # unit-amplitude weights leave an O(1/m) kurtosis error
    coef = complex_noise(rng, count * m, power / m).reshape(count, m)
    # exp(j w (aB + b)) = exp(j w aB) exp(j w b): a small matrix product instead of m*n exps
    blk = min(512, n_samples)
    a = np.arange(-(-n_samples // blk)) * blk
    b = np.arange(blk)
    outer = np.exp(1j * w[:, None, :] * a[None, :, None]) * coef[:, None, :]   # (count, A, m)
    inner = np.exp(1j * w[:, :, None] * b[None, None, :])                     # (count, m, B)
    return (outer @ inner).reshape(count, -1)[:, :n_samples]


def fading_trace(fading, doppler_hz: float, n_samples: int, sample_rate: float, rng,
                 n_rx: int = 1, taps=None) -> np.ndarray:
    """Complex gain per sample, shape (n_rx, n_samples), unit average power.

    Antennas are independent. Typical Urban taps are each Jakes-faded and
    summed into one composite gain; the tap delays are far below what a
    45 kHz hopping span resolves.
    """
    fading = Fading(fading)
    if doppler_hz < 0:
        raise ValueError("doppler_hz must be >= 0")
    if fading is Fading.NONE:
        return np.ones((n_rx, n_samples), dtype=complex)
    if fading is Fading.FLAT_RAYLEIGH:
        return _jakes(1.0, doppler_hz, n_samples, sample_rate, rng, n_rx)
    _, power_db = taps if taps is not None else load_tap_table()
    p = 10 ** (np.asarray(power_db) / 10)
    p = p / p.sum()
    return sum(_jakes(pk, doppler_hz, n_samples, sample_rate, rng, n_rx) for pk in p)


def cfo_phasor(n_samples: int, sample_rate: float, cfo_hz: float, drift_hz_per_s: float) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    return np.exp(2j * np.pi * (cfo_hz * t + 0.5 * drift_hz_per_s * t * t))


def apply_cfo(buf: ComplexBuffer, cfo_hz: float, drift_hz_per_s: float = 0.0) -> ComplexBuffer:
    if cfo_hz == 0 and drift_hz_per_s == 0:
        return buf
    ph = cfo_phasor(len(buf), buf.sample_rate_hz, cfo_hz, drift_hz_per_s)
    return ComplexBuffer(buf.samples * ph, buf.sample_rate_hz)


def noise_variance(snr_db: float, signal_power: float) -> float:
    return 0.0 if np.isinf(snr_db) and snr_db > 0 else signal_power / 10 ** (snr_db / 10)


def complex_noise(rng, n: int, variance: float) -> np.ndarray:
    return rng.standard_normal(2 * n).view(np.complex128) * np.sqrt(variance / 2)


def add_awgn(buf: ComplexBuffer, snr_db: float, signal_power: float, rng) -> ComplexBuffer:
    """Add circular Gaussian noise of variance ``signal_power / 10**(snr_db/10)``."""
    n0 = noise_variance(snr_db, signal_power)
    if n0 == 0:
        return buf
    return ComplexBuffer(buf.samples + complex_noise(rng, len(buf), n0), buf.sample_rate_hz)


def reference_signal_power(cfg: NprachConfig, reference=SnrReference.SUBCARRIER) -> float:
    """Signal power the SNR is quoted against, in time-domain sample units.

    The transmit power per sample is E/N^2. Quoting SNR in one subcarrier
    means the noise in the N*B sample bandwidth is N times larger.
    """
    p = cfg.tx_energy_per_sample / cfg.fft_size ** 2
    if SnrReference(reference) is SnrReference.SUBCARRIER:
        p *= cfg.fft_size
    return p


def stream(seed: int, antenna: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), antenna, role]))


def propagate(tx: ComplexBuffer, ch: ChannelConfig, cfg: NprachConfig) -> RxBuffers:
    n_cp = derive(cfg).cp_samples
    if not 0 <= ch.delay_samples < n_cp:
        raise ConfigError(f"delay_samples {ch.delay_samples} outside [0, {n_cp})")
    delayed = apply_delay(tx, ch.delay_samples)
    n = len(delayed)
    ph = None
    if ch.cfo_hz or ch.drift_hz_per_s:
        ph = cfo_phasor(n, tx.sample_rate_hz, ch.cfo_hz, ch.drift_hz_per_s)
    n0 = noise_variance(ch.snr_db, reference_signal_power(cfg, ch.snr_reference))
    out = np.empty((ch.n_rx, n), dtype=complex)
    gains = np.empty((ch.n_rx, n), dtype=complex)
    for ant in range(ch.n_rx):
        g = fading_trace(ch.fading, ch.doppler_hz, n, tx.sample_rate_hz,
                         stream(ch.seed, ant, FADING_ROLE))[0]
        y = delayed.samples * g
        if ph is not None:
            y = y * ph
        if n0 > 0:
            y = y + complex_noise(stream(ch.seed, ant, NOISE_ROLE), n, n0)
        out[ant] = y
        gains[ant] = g
    return RxBuffers(out, tx.sample_rate_hz, gains)
