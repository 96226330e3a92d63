"""Monte Carlo campaigns: detection, false alarm and ToA accuracy."""

from __future__ import annotations

import csv
import enum
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import pmap
from .channel import ChannelConfig, Fading, SnrReference, propagate, stream
from .hopping import full_pattern
from .numerology import CONFIG_KEYS, ConfigError, NprachConfig, check, coerce, config_from_mapping, derive, read_toml
from .receiver import SearchGrids, calibrate_threshold, default_grids, demodulate, detect, estimate
from .waveform import ComplexBuffer, default_sequence, generate

DRAW_ROLE = 0
PERCENTILES = (1, 5, 50, 95, 99)


class Mode(str, enum.Enum):
    DETECTION = "detection"
    FALSE_ALARM = "false_alarm"
    TOA_SWEEP = "toa_sweep"


class DrawMode(str, enum.Enum):
    TWO_POINT = "two_point"   # +/- magnitude, equiprobable
    INTERVAL = "interval"     # uniform in [-magnitude, magnitude]


# coverage class -> (symbol groups, operating SNR in dB)
COVERAGE_CLASSES = {
    "C1": (8, 14.25),
    "C2": (32, 4.25),
    "C3": (128, -5.75),
}


@dataclass(frozen=True)
class Scenario:
    cfg: NprachConfig = field(default_factory=NprachConfig)
    coverage_class: str | None = None
    mode: Mode = Mode.DETECTION
    snr_db: float = -5.75
    snr_reference: SnrReference = SnrReference.SUBCARRIER
    fading: Fading = Fading.TYPICAL_URBAN
    doppler_hz: float = 1.0
    n_rx: int = 2
    cfo_hz: float = 50.0
    drift_hz_per_s: float = 22.5
    draw_mode: DrawMode = DrawMode.TWO_POINT
    n_trials: int = 2000
    master_seed: int = 0
    toa_step: float = 0.125
    cfo_max_hz: float = 60.0
    cfo_step_hz: float = 2.5
    block_size: int = 4
    threshold: float | None = None
    target_fa: float = 1e-3
    calibration_trials: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "fading", Fading(self.fading))
        object.__setattr__(self, "draw_mode", DrawMode(self.draw_mode))
        object.__setattr__(self, "snr_reference", SnrReference(self.snr_reference))
        check(self.cfg)
        if self.coverage_class is not None and self.coverage_class not in COVERAGE_CLASSES:
            raise ConfigError(f"unknown coverage class {self.coverage_class!r}")
        if self.n_trials < 0:
            raise ConfigError("n_trials must be >= 0")
        if self.n_rx < 1:
            raise ConfigError("n_rx must be >= 1")
        self.grids()

    @classmethod
    def preset(cls, coverage_class: str, **overrides) -> Scenario:
        """Scenario for one of the coverage classes C1, C2, C3."""
        L, snr = COVERAGE_CLASSES[coverage_class]
        cfg = overrides.pop("cfg", NprachConfig()).replace(preamble_groups=L)
        overrides.setdefault("snr_db", snr)
        return cls(cfg=cfg, coverage_class=coverage_class, **overrides)

    def replace(self, **changes) -> Scenario:
        return replace(self, **changes)

    def grids(self) -> SearchGrids:
        return default_grids(self.cfg, self.toa_step, self.cfo_max_hz, self.cfo_step_hz, self.block_size)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "cfg":
                d.update(v.to_dict())
            else:
                d[f.name] = v.value if isinstance(v, enum.Enum) else v
        return d


_SCENARIO_TYPES = {
    "coverage_class": str, "mode": str, "snr_db": float, "snr_reference": str, "fading": str,
    "doppler_hz": float, "n_rx": int, "cfo_hz": float, "drift_hz_per_s": float, "draw_mode": str,
    "n_trials": int, "master_seed": int, "toa_step": float, "cfo_max_hz": float,
    "cfo_step_hz": float, "block_size": int, "threshold": float, "target_fa": float,
    "calibration_trials": int,
}


def scenario_from_mapping(data: dict) -> Scenario:
    """Build a Scenario from flat keys; config fields may appear alongside scenario fields.

    A coverage class sets L and SNR first; explicit keys override it.
    """
    unknown = sorted(set(data) - CONFIG_KEYS - set(_SCENARIO_TYPES))
    if unknown:
        raise ConfigError(f"unknown scenario key(s): {', '.join(unknown)}")
    cfg_keys = {k: v for k, v in data.items() if k in CONFIG_KEYS}
    scn_keys = {k: coerce(k, v, _SCENARIO_TYPES) for k, v in data.items() if k in _SCENARIO_TYPES}
    try:
        for key, enum_t in (("mode", Mode), ("fading", Fading), ("draw_mode", DrawMode),
                            ("snr_reference", SnrReference)):
            if key in scn_keys:
                scn_keys[key] = enum_t(scn_keys[key].lower())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cls_name = scn_keys.get("coverage_class")
    base = NprachConfig()
    if cls_name is not None:
        if cls_name not in COVERAGE_CLASSES:
            raise ConfigError(f"unknown coverage class {cls_name!r}")
        L, snr = COVERAGE_CLASSES[cls_name]
        base = base.replace(preamble_groups=L)
        scn_keys.setdefault("snr_db", snr)
    cfg = config_from_mapping(cfg_keys, base)
    return Scenario(cfg=cfg, **scn_keys)


def load_scenario(path) -> Scenario:
    data = read_toml(path)
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: scenario must be flat, found table(s) {', '.join(nested)}")
    return scenario_from_mapping(data)


def dump_scenario(scn: Scenario) -> str:
    lines = []
    for k, v in scn.to_dict().items():
        if v is None:
            continue
        lines.append(f'{k} = "{v}"' if isinstance(v, str) else f"{k} = {v!r}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    n0: int
    d_true: float
    d_est: float
    detected: bool
    cfo_true: float
    cfo_est: float
    drift_true: float
    metric: float
    normalized_metric: float
    sample_rate_hz: float

    @property
    def toa_error_us(self) -> float:
        return (self.d_est - self.d_true) / self.sample_rate_hz * 1e6

    @property
    def cfo_error_hz(self) -> float:
        return self.cfo_est - self.cfo_true


def trial_seed(master_seed: int, trial_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return int(ss.generate_state(1, np.uint32)[0])


def _draw(rng, magnitude, mode):
    if magnitude == 0:
        return 0.0
    if mode is DrawMode.TWO_POINT:
        return float(magnitude if rng.integers(2) else -magnitude)
    return float(rng.uniform(-magnitude, magnitude))


def run_trial(scn: Scenario, trial_index: int, threshold: float | None = None) -> TrialRecord:
    """One independent trial; a pure function of (scenario, trial_index, threshold)."""
    thr = scn.threshold if threshold is None else threshold
    if thr is None and scn.mode is not Mode.TOA_SWEEP:
        raise ConfigError("a detection threshold is required (set threshold or calibrate)")
    cfg = scn.cfg
    d = derive(cfg)
    seed = trial_seed(scn.master_seed, trial_index)
    rng = stream(seed, 0, DRAW_ROLE)
    D = float(rng.uniform(0, d.cp_samples))
    n0 = int(rng.integers(cfg.band_subcarriers))
    cfo = _draw(rng, scn.cfo_hz, scn.draw_mode)
    drift = _draw(rng, scn.drift_hz_per_s, scn.draw_mode)
    pattern = full_pattern(cfg, n0)
    seq = default_sequence(cfg.preamble_groups)

    if scn.mode is Mode.FALSE_ALARM:
        tx = ComplexBuffer(np.zeros(d.preamble_samples, dtype=complex), d.sample_rate_hz)
        ch = ChannelConfig(snr_db=scn.snr_db, n_rx=scn.n_rx, seed=seed,
                           snr_reference=scn.snr_reference)
        D = cfo = drift = math.nan
    else:
        tx = generate(cfg, pattern, seq)
        ch = ChannelConfig(delay_samples=D, cfo_hz=cfo, drift_hz_per_s=drift, snr_db=scn.snr_db,
                           fading=scn.fading, doppler_hz=scn.doppler_hz, n_rx=scn.n_rx, seed=seed,
                           snr_reference=scn.snr_reference)
    rx = propagate(tx, ch, cfg)
    res = estimate(demodulate(rx, cfg, pattern), seq, pattern, scn.grids(), cfg)
    detected = True if thr is None else detect(res, thr).detected
    return TrialRecord(
        trial=int(trial_index), seed=seed, n0=n0, d_true=D, d_est=res.toa_samples,
        detected=bool(detected), cfo_true=cfo, cfo_est=res.cfo_hz, drift_true=drift,
        metric=res.metric, normalized_metric=res.normalized_metric, sample_rate_hz=d.sample_rate_hz,
    )


@dataclass
class CampaignStats:
    scenario: Scenario
    threshold: float | None
    trials: int
    detections: int
    misdetections: int
    false_alarms: int
    toa_errors_us: np.ndarray
    percentiles: dict
    wall_time_s: float
    records: list = field(repr=False, default_factory=list)

    def fraction_within(self, bound_us: float) -> float:
        if self.toa_errors_us.size == 0:
            return math.nan
        return float(np.mean(np.abs(self.toa_errors_us) <= bound_us))

    def summary(self) -> dict:
        """All scalars plus the scenario echo; everything but wall_time_s is reproducible."""
        return {
            "software_version": __version__,
            "scenario": self.scenario.to_dict(),
            "threshold": self.threshold,
            "trials": self.trials,
            "detections": self.detections,
            "misdetections": self.misdetections,
            "false_alarms": self.false_alarms,
            "misdetection_rate": self.misdetections / self.trials if self.trials else None,
            "false_alarm_rate": self.false_alarms / self.trials if self.trials else None,
            "toa_error_percentiles_us": {str(k): v for k, v in self.percentiles.items()},
            "toa_within_3us": None if self.toa_errors_us.size == 0 else self.fraction_within(3.0),
            "toa_error_convention": (
                "all trials" if self.scenario.mode is Mode.TOA_SWEEP else "detected trials only"
            ),
            "wall_time_s": self.wall_time_s,
        }

    def comparable(self) -> dict:
        s = self.summary()
        s.pop("wall_time_s")
        s["toa_errors_us"] = self.toa_errors_us.tolist()
        return s


def aggregate(scn: Scenario, threshold, records, wall_time_s: float = 0.0) -> CampaignStats:
    records = sorted(records, key=lambda r: r.trial)
    n = len(records)
    hits = sum(r.detected for r in records)
    if scn.mode is Mode.FALSE_ALARM:
        detections = misdetections = 0
        false_alarms = hits
        errs = np.empty(0)
    else:
        detections, misdetections, false_alarms = hits, n - hits, 0
        keep = records if scn.mode is Mode.TOA_SWEEP else [r for r in records if r.detected]
        errs = np.array([r.toa_error_us for r in keep], dtype=float)
    pct = {p: float(np.percentile(errs, p)) for p in PERCENTILES} if errs.size else {}
    return CampaignStats(scn, threshold, n, detections, misdetections, false_alarms, errs, pct,
                         wall_time_s, records)


def run_campaign(scn: Scenario, threshold: float | None = None, workers: int = 1) -> CampaignStats:
    """Run ``scn.n_trials`` trials and aggregate; results do not depend on `workers`."""
    thr = scn.threshold if threshold is None else threshold
    t0 = time.perf_counter()
    records = pmap(partial(run_trial, scn, threshold=thr), range(scn.n_trials), workers)
    return aggregate(scn, thr, records, time.perf_counter() - t0)


def calibrate(scn: Scenario, target_fa: float | None = None, n_trials: int | None = None,
              seed: int | None = None, workers: int = 1) -> float:
    """Noise-only threshold for the scenario's (L, grids, n_rx)."""
    return calibrate_threshold(
        scn.cfg, scn.grids(),
        scn.target_fa if target_fa is None else target_fa,
        scn.calibration_trials if n_trials is None else n_trials,
        scn.master_seed if seed is None else seed,
        n_rx=scn.n_rx, workers=workers,
    )


CSV_FIELDS = ("trial", "seed", "n0", "D_true", "D_est", "detected", "cfo_true", "cfo_est",
              "metric", "normalized_metric")


def export(stats: CampaignStats, out_dir) -> tuple[Path, Path]:
    """Write ``summary.json`` and ``trials.csv`` (one row per trial) into `out_dir`."""
    out = Path(out_dir)
    summary_path, csv_path = out / "summary.json", out / "trials.csv"
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary_path.write_text(json.dumps(stats.summary(), indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for r in stats.records:
                w.writerow([r.trial, r.seed, r.n0, repr(r.d_true), repr(r.d_est), int(r.detected),
                            repr(r.cfo_true), repr(r.cfo_est), repr(r.metric),
                            repr(r.normalized_metric)])
    except OSError as exc:
        raise OSError(f"cannot write campaign results to {out}: {exc}") from exc
    return summary_path, csv_path
