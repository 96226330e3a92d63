import numpy as np
import pytest
from scipy import signal, stats

from nprach.channel import (
    ChannelConfig,
    ComplexBuffer,
    add_awgn,
    apply_cfo,
    apply_delay,
    fading_trace,
    load_tap_table,
    propagate,
)
from nprach.hopping import full_pattern
from nprach.numerology import ConfigError, NprachConfig, derive
from nprach.receiver import demodulate
from nprach.waveform import default_sequence, generate

FS = 240000.0


def tone(k, n, N=64):
    return ComplexBuffer(np.exp(2j * np.pi * k * np.arange(n) / N), FS)


def test_delay_zero_is_identity():
    b = tone(3, 640)
    assert apply_delay(b, 0).samples is b.samples


def test_integer_delay_shift_and_zero_fill():
    b = tone(3, 640)
    y = apply_delay(b, 5).samples
    assert np.all(y[:5] == 0)
    assert np.array_equal(y[5:], b.samples[:-5])


@pytest.mark.parametrize("k,D", [(1, 7), (5, 30), (11, 63)])
def test_integer_delay_phase(k, D):
    y = apply_delay(tone(k, 384), D).samples
    window = y[64:128]
    ref = tone(k, 384).samples[64:128]
    assert np.allclose(window / ref, np.exp(-2j * np.pi * k * D / 64), rtol=0, atol=1e-12)


def test_fractional_delay_matches_upsampled_shift():
    # oracle: upsample 2x band-limited, shift 5 fine samples, decimate
    x = tone(1, 384).samples
    up = signal.resample(x, 2 * len(x))
    ref = np.roll(up, 5)[::2]
    y = apply_delay(tone(1, 384), 2.5).samples
    assert np.allclose(y[64:], ref[64:], rtol=0, atol=1e-9)
    sym = np.fft.fft(y[64:128])[1] / np.fft.fft(x[64:128])[1]
    assert abs(np.angle(sym) - (-2 * np.pi * 2.5 / 64)) < 1e-6


def test_delay_range_check():
    with pytest.raises(ValueError):
        apply_delay(tone(1, 64), 64, max_delay=64)
    with pytest.raises(ValueError):
        apply_delay(tone(1, 64), -1)


def test_no_fading_is_ones(rng):
    h = fading_trace("none", 1.0, 100, FS, rng, n_rx=2)
    assert h.shape == (2, 100) and np.all(h == 1)


def test_flat_rayleigh_statistics():
    # one sample per independent realization: 10^6 samples
    rng = np.random.default_rng(7)
    h = np.concatenate([fading_trace("flat_rayleigh", 1.0, 1, FS, rng, n_rx=200_000)[:, 0] for _ in range(5)])
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)
    assert stats.kstest(np.abs(h), stats.rayleigh(scale=np.sqrt(0.5)).cdf).pvalue > 0.01


def test_typical_urban_statistics():
    rng = np.random.default_rng(8)
    h = fading_trace("typical_urban", 1.0, 1, FS, rng, n_rx=100_000)[:, 0]
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)
    assert stats.kstest(np.abs(h), stats.rayleigh(scale=np.sqrt(0.5)).cdf).pvalue > 0.01


@pytest.mark.parametrize("model", ["flat_rayleigh", "typical_urban"])
def test_slow_fading_correlation(model):
    # sampling at 1/lag yields exactly the two instants of interest
    rng = np.random.default_rng(9)
    h = fading_trace(model, 1.0, 2, 1 / 0.01, rng, n_rx=4000)
    rho = np.mean(h[:, 0] * np.conj(h[:, 1])) / np.mean(np.abs(h[:, 0]) ** 2)
    assert abs(rho) >= 0.99


def test_jakes_autocorrelation_follows_bessel():
    from scipy.special import j0

    rng = np.random.default_rng(10)
    fd, tau = 50.0, 0.01
    h = fading_trace("flat_rayleigh", fd, 2, 1 / tau, rng, n_rx=20000)
    rho = np.mean(h[:, 0] * np.conj(h[:, 1])).real / np.mean(np.abs(h[:, 0]) ** 2)
    assert rho == pytest.approx(j0(2 * np.pi * fd * tau), abs=0.03)


def test_tap_table():
    delay, power = load_tap_table()
    assert len(delay) == 12
    assert delay.max() <= 5.0
    assert power.max() == 0.0


def test_tap_table_file(tmp_path, rng):
    p = tmp_path / "taps.txt"
    p.write_text("0.0, 0.0\n1.0, -3.0\n")
    taps = load_tap_table(p)
    assert taps[0].tolist() == [0.0, 1.0]
    h = fading_trace("typical_urban", 1.0, 10, FS, rng, taps=taps)
    assert h.shape == (1, 10)


def test_cfo_identity_and_rate():
    b = tone(0, 100)
    assert apply_cfo(b, 0, 0) is b
    y = apply_cfo(ComplexBuffer(np.ones(100, dtype=complex), FS), 50.0).samples
    step = np.angle(y[1:] / y[:-1])
    assert np.allclose(step, 2 * np.pi * 50 / FS, rtol=1e-12)


def test_cfo_drift_shift():
    n = int(0.2048 * FS)
    y = apply_cfo(ComplexBuffer(np.ones(n + 1, dtype=complex), FS), 0.0, 22.5).samples
    inst = np.angle(y[1:] / y[:-1]) * FS / (2 * np.pi)
    assert inst[-1] - inst[0] == pytest.approx(22.5 * 0.2048, abs=1e-3)


def test_awgn_infinite_snr_identity(rng):
    b = tone(1, 10)
    assert add_awgn(b, np.inf, 1.0, rng) is b


def test_awgn_measured_snr(rng):
    b = tone(1, 1_000_000)
    y = add_awgn(b, 0.0, 1.0, rng).samples
    v = y - b.samples
    assert 10 * np.log10(1.0 / np.mean(np.abs(v) ** 2)) == pytest.approx(0.0, abs=0.05)
    assert np.mean(v) == pytest.approx(0, abs=5e-3)
    assert np.mean(v * v) == pytest.approx(0, abs=5e-3)   # circular


def test_awgn_noise_variance(rng):
    v = add_awgn(ComplexBuffer(np.zeros(1_000_000, dtype=complex), FS), 10.0, 3.0, rng).samples
    assert np.mean(np.abs(v) ** 2) == pytest.approx(0.3, rel=0.02)


def test_snr_references():
    from nprach.channel import reference_signal_power

    cfg = NprachConfig(tx_energy_per_sample=2.0)
    assert reference_signal_power(cfg, "sample") == pytest.approx(2.0 / 64 ** 2)
    assert reference_signal_power(cfg, "subcarrier") == pytest.approx(2.0 / 64)


def test_subcarrier_snr_is_post_fft_symbol_snr(cfg8):
    # noise in one demodulated bin vs the clean symbol power E
    cfg = cfg8
    d = derive(cfg)
    pat = full_pattern(cfg, 0)
    tx = ComplexBuffer(np.zeros(d.preamble_samples, dtype=complex), d.sample_rate_hz)
    ys = []
    for seed in range(40):
        rx = propagate(tx, ChannelConfig(snr_db=6.0, seed=seed), cfg)
        ys.append(demodulate(rx, cfg, pat).symbols.ravel())
    noise = np.mean(np.abs(np.concatenate(ys)) ** 2)
    assert 10 * np.log10(cfg.tx_energy_per_sample / noise) == pytest.approx(6.0, abs=0.3)


def test_propagate_all_off_is_identity(cfg8):
    tx = generate(cfg8, full_pattern(cfg8, 1), default_sequence(8))
    rx = propagate(tx, ChannelConfig(n_rx=2), cfg8)
    assert rx.samples.shape == (2, 3072)
    assert np.array_equal(rx.samples[0], tx.samples) and np.array_equal(rx.samples[1], tx.samples)


def test_propagate_deterministic(cfg8):
    tx = generate(cfg8, full_pattern(cfg8, 1), default_sequence(8))
    ch = ChannelConfig(delay_samples=12.3, cfo_hz=50, drift_hz_per_s=-22.5, snr_db=0.0,
                       fading="flat_rayleigh", n_rx=2, seed=99)
    a, b = propagate(tx, ch, cfg8), propagate(tx, ch, cfg8)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples[0], a.samples[1])
    c = propagate(tx, ChannelConfig(**{**ch.__dict__, "seed": 100}), cfg8)
    assert not np.array_equal(a.samples, c.samples)


def test_propagate_antenna_streams_are_prefix_stable(cfg8):
    # antenna 0 draws do not depend on how many antennas are simulated
    tx = generate(cfg8, full_pattern(cfg8, 1), default_sequence(8))
    kw = dict(snr_db=3.0, fading="flat_rayleigh", seed=5)
    one = propagate(tx, ChannelConfig(n_rx=1, **kw), cfg8)
    two = propagate(tx, ChannelConfig(n_rx=2, **kw), cfg8)
    assert np.array_equal(one.samples[0], two.samples[0])


def test_propagate_delay_range(cfg8):
    tx = generate(cfg8, full_pattern(cfg8, 1), default_sequence(8))
    with pytest.raises(ConfigError):
        propagate(tx, ChannelConfig(delay_samples=64), cfg8)


def test_propagate_delay_32_phase(cfg8):
    pat = full_pattern(cfg8, 3)
    tx = generate(cfg8, pat, default_sequence(8))
    grid = demodulate(propagate(tx, ChannelConfig(delay_samples=32), cfg8), cfg8, pat)
    expected = np.exp(-2j * np.pi * pat.indices * 32 / 64)
    assert np.allclose(grid.symbols[0], expected[:, None], rtol=0, atol=1e-12)


@pytest.mark.parametrize("D,cfo", [(0, 0.0), (17, 50.0), (63, -37.5)])
def test_propagate_matches_analytic_received_signal(D, cfo):
    cfg = NprachConfig(preamble_groups=8, tx_energy_per_sample=1.7)
    d = derive(cfg)
    pat = full_pattern(cfg, 6)
    tx = generate(cfg, pat, default_sequence(8))
    y = propagate(tx, ChannelConfig(delay_samples=D, cfo_hz=cfo), cfg).samples[0]
    df = cfo / d.sample_rate_hz
    amp = np.sqrt(cfg.tx_energy_per_sample) / 64
    for m in range(8):
        n = np.arange(-d.cp_samples + D, 5 * 64)         # samples fed by group m itself
        n_abs = m * d.group_samples + d.cp_samples + n
        ref = amp * np.exp(2j * np.pi * df * n_abs) * np.exp(2j * np.pi * pat.indices[m] * (n - D) / 64)
        assert np.allclose(y[n_abs], ref, rtol=1e-9, atol=0)


def test_rx_dump(tmp_path, cfg8):
    tx = generate(cfg8, full_pattern(cfg8, 1), default_sequence(8))
    rx = propagate(tx, ChannelConfig(n_rx=2, snr_db=10.0), cfg8)
    paths = rx.dump(tmp_path / "rx")
    assert [p.name for p in paths] == ["rx_rx0.iq", "rx_rx1.iq"]
    assert paths[0].stat().st_size == 3072 * 8


def test_channel_config_checks():
    with pytest.raises(ConfigError):
        ChannelConfig(n_rx=0)
    with pytest.raises(ValueError):
        ChannelConfig(fading="rician")
