"""
Preamble waveform and frequency hopping
=======================================

Build the 128-group preamble for every starting subcarrier, look at how the
twelve users move through the band, and confirm the waveform is a constant
envelope single tone.
"""

import numpy as np

from nprach import NprachConfig, derive, full_pattern
from nprach.hopping import check_invariants
from nprach.waveform import default_sequence, generate, papr_db

cfg = NprachConfig(preamble_groups=128)
d = derive(cfg)
print(f"{d.sample_rate_hz / 1e3:.0f} kHz sampling, {d.cp_samples}-sample CP, "
      f"{d.group_samples} samples per group, {d.preamble_samples} samples in total")

# one pattern per starting subcarrier; every column of this array is a permutation of 0..11
patterns = np.array([full_pattern(cfg, n0).indices for n0 in range(12)])
print("first 8 groups for n0 = 0..3:")
print(patterns[:4, :8])
print("invariant violations:", sum(len(check_invariants(full_pattern(cfg, n0))) for n0 in range(12)))

# the transmitted signal never leaves the unit circle (scaled by sqrt(E)/N)
x = generate(cfg, full_pattern(cfg, 0), default_sequence(128))
print(f"PAPR = {papr_db(x):.2e} dB, |x| in [{np.abs(x.samples).min():.6f}, {np.abs(x.samples).max():.6f}]")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(8, 3))
    for n0 in range(3):
        ax.step(np.arange(32), patterns[n0, :32], where="post", label=f"n0={n0}")
    ax.set_xlabel("symbol group")
    ax.set_ylabel("subcarrier")
    ax.legend()
    fig.tight_layout()
    fig.savefig("hopping.png", dpi=100)
    print("saved hopping.png")
