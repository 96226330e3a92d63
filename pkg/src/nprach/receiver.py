"""Demodulation, joint ToA/CFO search and threshold detection."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from ._parallel import pmap
from .channel import RxBuffers, complex_noise
from .hopping import HoppingPattern, full_pattern
from .numerology import ConfigError, NprachConfig, derive
from .waveform import PreambleSequence, default_sequence

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ReceiveGrid:
    symbols: np.ndarray   # (n_rx, L, repeats)

    @property
    def shape(self):
        return self.symbols.shape

    def energy(self) -> float:
        return float(np.sum(self.symbols.real ** 2 + self.symbols.imag ** 2))


@dataclass(frozen=True)
class SearchGrids:
    toa_grid: np.ndarray      # samples
    cfo_grid: np.ndarray      # Hz
    block_size: int = 4

    def check(self, cfg: NprachConfig) -> SearchGrids:
        errs = []
        if self.block_size < 1 or cfg.preamble_groups % self.block_size:
            errs.append(f"L={cfg.preamble_groups} is not a multiple of block size {self.block_size}")
        if len(self.toa_grid) == 0 or len(self.cfo_grid) == 0:
            errs.append("search grids must be nonempty")
        elif np.any(self.toa_grid < 0) or np.any(self.toa_grid >= derive(cfg).cp_samples):
            errs.append("toa grid must lie in [0, N_cp)")
        if errs:
            raise ConfigError(errs)
        return self


def default_grids(cfg: NprachConfig, toa_step: float = 0.125, cfo_max_hz: float = 60.0,
                  cfo_step_hz: float = 2.5, block_size: int = 4) -> SearchGrids:
    n_cp = derive(cfg).cp_samples
    n_toa = int(np.ceil(n_cp / toa_step - 1e-9))
    n_cfo = int(round(2 * cfo_max_hz / cfo_step_hz)) + 1
    return SearchGrids(
        toa_grid=np.arange(n_toa) * toa_step,
        cfo_grid=np.linspace(-cfo_max_hz, cfo_max_hz, n_cfo),
        block_size=block_size,
    ).check(cfg)


@dataclass(frozen=True)
class DetectionResult:
    toa_samples: float
    toa_seconds: float
    cfo_hz: float
    metric: float
    normalized_metric: float
    detected: bool | None = None

    def to_record(self) -> dict:
        return {
            "detected": self.detected,
            "toa_us": self.toa_seconds * 1e6,
            "cfo_hz": self.cfo_hz,
            "metric": self.metric,
            "normalized_metric": self.normalized_metric,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def demodulate(rx: RxBuffers, cfg: NprachConfig, pattern: HoppingPattern) -> ReceiveGrid:
    """Drop each group's CP, FFT every N-sample repeat and read the hopped bin."""
    d = derive(cfg)
    x = np.asarray(rx.samples)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != d.preamble_samples:
        raise ValueError(f"received length {x.shape[1]} != L*group_samples = {d.preamble_samples}")
    L, xi, N = cfg.preamble_groups, cfg.repeats_per_group, cfg.fft_size
    blocks = x.reshape(x.shape[0], L, d.group_samples)[:, :, d.cp_samples:]
    spec = np.fft.fft(blocks.reshape(x.shape[0], L, xi, N), axis=-1)
    bins = cfg.band_offset + np.asarray(pattern.indices)
    idx = np.broadcast_to(bins[None, :, None, None], spec.shape[:-1] + (1,))
    return ReceiveGrid(np.take_along_axis(spec, idx, axis=-1)[..., 0])


def dirichlet_gain(delta_f_norm: float, D: float, N: int, E: float = 1.0) -> complex:
    """Amplitude/phase of a demodulated tone under normalized CFO and delay."""
    if delta_f_norm == 0:
        ratio = 1.0
    else:
        den = N * np.sin(np.pi * delta_f_norm)
        ratio = 1.0 if den == 0 else np.sin(N * np.pi * delta_f_norm) / den
    return complex(np.sqrt(E) * ratio * np.exp(2j * np.pi * delta_f_norm * ((N - 1) / 2 - D)))


def _normalized_cfo(cfo_hz, cfg):
    return np.asarray(cfo_hz, dtype=float) / (cfg.fft_size * cfg.subcarrier_spacing_hz)


def metric(grid: ReceiveGrid, seq: PreambleSequence, pattern: HoppingPattern, D: float,
           cfo_hz: float, Q: int, cfg: NprachConfig) -> float:
    """Block-noncoherent correlation at one (D, CFO) hypothesis, summed over antennas.

    Straight evaluation of the double sum; `metric_surface` is the fast path.
    """
    L = cfg.preamble_groups
    if Q < 1 or L % Q:
        raise ValueError(f"L={L} is not a multiple of Q={Q}")
    d = derive(cfg)
    N, xi = cfg.fft_size, cfg.repeats_per_group
    df = float(_normalized_cfo(cfo_hz, cfg))
    y = grid.symbols
    total = 0.0
    for ant in range(y.shape[0]):
        for g in range(L // Q):
            acc = 0j
            for m in range(g * Q, (g + 1) * Q):
                rot = np.exp(2j * np.pi * pattern.indices[m] * D / N) * np.conj(seq.symbols[m])
                for i in range(xi):
                    acc += y[ant, m, i] * rot * np.exp(-2j * np.pi * df * (m * d.group_samples + i * N))
            total += abs(acc) ** 2
    return float(total)


def _fft_size_for(toa_grid, N):
    """Zero-padded DFT length if `toa_grid` is 0, s, 2s, ... with N/s an integer, else None."""
    if len(toa_grid) < 2 or toa_grid[0] != 0:
        return None
    step = toa_grid[1] - toa_grid[0]
    P = N / step
    if abs(P - round(P)) > 1e-9 or len(toa_grid) > round(P):
        return None
    if not np.allclose(toa_grid, np.arange(len(toa_grid)) * step, rtol=0, atol=1e-12):
        return None
    return int(round(P))


def metric_surface(grid: ReceiveGrid, seq: PreambleSequence, pattern: HoppingPattern,
                   grids: SearchGrids, cfg: NprachConfig, method: str = "auto") -> np.ndarray:
    """Metric over ``cfo_grid x toa_grid``, shape (n_cfo, n_toa).

    CFO is compensated per hypothesis and each block's symbols are folded
    onto the subcarriers they occupy (Z_g[k]); per block the ToA dimension
    is then the DTFT J_g(D) = sum_k Z_g[k] exp(j 2 pi k D / N). Methods:

    ``"autocorr"`` (default)
        Expands sum_g |J_g(D)|^2 = sum_lag R[lag] exp(j 2 pi lag D / N), with R
        the block-summed autocorrelation of Z_g over k, so blocks are
        combined before the ToA grid is touched.
    ``"fft"``
        Evaluates each J_g on the grid with a zero-padded inverse FFT; needs a
        grid 0, s, 2s, ... with N/s an integer.
    ``"direct"``
        Evaluates each J_g on the grid as a matrix product.
    """
    if method not in ("auto", "autocorr", "fft", "direct"):
        raise ValueError(f"unknown method {method!r}")
    Q = grids.block_size
    L, N, xi = cfg.preamble_groups, cfg.fft_size, cfg.repeats_per_group
    if Q < 1 or L % Q:
        raise ValueError(f"L={L} is not a multiple of Q={Q}")
    G = derive(cfg).group_samples
    y = grid.symbols
    n_rx = y.shape[0]
    toa = np.asarray(grids.toa_grid, dtype=float)
    df = _normalized_cfo(grids.cfo_grid, cfg)
    rep = np.exp(-2j * np.pi * np.outer(df, np.arange(xi) * N))               # (c, xi)
    grp = np.exp(-2j * np.pi * np.outer(df, np.arange(L) * G))                # (c, L)
    z = np.einsum("ami,ci->acm", y, rep) * grp * np.conj(seq.symbols)        # (a, c, L)
    omega = np.asarray(pattern.indices)
    n_blk = L // Q
    z = z.reshape(n_rx * len(df), n_blk, Q)

    if method == "direct":
        steer = np.exp(2j * np.pi * omega.reshape(n_blk, Q)[:, :, None] * toa[None, None, :] / N)
        J = np.matmul(z.transpose(1, 0, 2), steer).transpose(1, 0, 2)         # (r, g, d)
        power = (J.real ** 2 + J.imag ** 2).sum(axis=1)
        return power.reshape(n_rx, len(df), -1).sum(axis=0)

    K = int(omega.max()) + 1
    fold = np.zeros((n_blk, Q, K))
    fold[np.repeat(np.arange(n_blk), Q), np.tile(np.arange(Q), n_blk), omega] = 1.0
    Z = np.einsum("rgq,gqk->rgk", z, fold)                                    # (r, g, K)

    if method == "fft":
        P = _fft_size_for(toa, N)
        if P is None:
            raise ValueError("toa grid is not FFT-compatible")
        J = np.fft.ifft(Z, n=P, axis=-1)[..., : len(toa)] * P
        power = (J.real ** 2 + J.imag ** 2).sum(axis=1)
        return power.reshape(n_rx, len(df), -1).sum(axis=0)

    # block-summed autocorrelation over subcarrier index, lags -(K-1)..K-1
    A = np.fft.fft(Z, n=2 * K, axis=-1)
    R = np.fft.ifft((A.real ** 2 + A.imag ** 2).sum(axis=1), axis=-1)       # (r, 2K)
    R = R.reshape(n_rx, len(df), 2 * K).sum(axis=0)
    lags = np.fft.fftfreq(2 * K, 1.0 / (2 * K))
    steer = np.exp(2j * np.pi * np.outer(lags, toa) / N)                      # (2K, d)
    return (R @ steer).real


def _argmax(surface, toa_grid, cfo_grid):
    best = surface.max()
    cand = np.argwhere(surface >= best - TIE_RTOL * abs(best))
    # smallest D, then smallest |CFO|, then the negative CFO
    key = sorted(cand.tolist(), key=lambda ci: (toa_grid[ci[1]], abs(cfo_grid[ci[0]]), cfo_grid[ci[0]]))
    c, d = key[0]
    return c, d


def estimate(grid: ReceiveGrid, seq: PreambleSequence, pattern: HoppingPattern,
             grids: SearchGrids, cfg: NprachConfig, method: str = "auto") -> DetectionResult:
    surface = metric_surface(grid, seq, pattern, grids, cfg, method)
    toa = np.asarray(grids.toa_grid, dtype=float)
    cfo = np.asarray(grids.cfo_grid, dtype=float)
    c, d = _argmax(surface, toa, cfo)
    J = float(surface[c, d])
    energy = grid.energy()
    fs = derive(cfg).sample_rate_hz
    return DetectionResult(
        toa_samples=float(toa[d]),
        toa_seconds=float(toa[d]) / fs,
        cfo_hz=float(cfo[c]),
        metric=J,
        normalized_metric=J / energy if energy > 0 else 0.0,
    )


def detect(result: DetectionResult, threshold: float) -> DetectionResult:
    """Declare a preamble when the normalized metric strictly exceeds `threshold`."""
    return replace(result, detected=bool(result.normalized_metric > threshold))


def noise_only_metric(cfg: NprachConfig, grids: SearchGrids, seed, n_rx: int = 2,
                      noise_var: float = 1.0) -> float:
    """Normalized metric of one noise-only receive window against a random-start pattern."""
    rng = np.random.default_rng(seed)
    n0 = int(rng.integers(cfg.band_subcarriers))
    d = derive(cfg)
    x = complex_noise(rng, n_rx * d.preamble_samples, noise_var).reshape(n_rx, -1)
    pattern = full_pattern(cfg, n0)
    grid = demodulate(RxBuffers(x, d.sample_rate_hz), cfg, pattern)
    res = estimate(grid, default_sequence(cfg.preamble_groups), pattern, grids, cfg)
    return res.normalized_metric


def _noise_trial(i, cfg, grids, seed, n_rx, noise_var):
    return noise_only_metric(cfg, grids, np.random.SeedSequence([int(seed), int(i)]), n_rx, noise_var)


def calibrate_threshold(cfg: NprachConfig, grids: SearchGrids, target_fa: float, n_trials: int,
                        seed: int, n_rx: int = 2, noise_var: float = 1.0, workers: int = 1,
                        return_samples: bool = False):
    """Threshold on the normalized metric that noise alone exceeds with rate `target_fa`.

    Runs `n_trials` noise-only windows through demodulation and search and
    returns the (1 - target_fa) empirical quantile, interpolating linearly
    between order statistics. Roughly 10/target_fa trials are needed for a
    stable estimate.
    """
    if not 0 < target_fa < 1:
        raise ValueError("target_fa must lie in (0, 1)")
    if n_trials < 100:
        raise ValueError(f"n_trials={n_trials} is too small to calibrate (need >= 100)")
    grids.check(cfg)
    fn = partial(_noise_trial, cfg=cfg, grids=grids, seed=seed, n_rx=n_rx, noise_var=noise_var)
    vals = np.array(pmap(fn, range(n_trials), workers))
    thr = float(np.quantile(vals, 1 - target_fa))
    return (thr, vals) if return_samples else thr
