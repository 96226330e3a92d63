"""
A small detection campaign
==========================

Calibrate a noise-only threshold, then run a short Monte Carlo campaign for
the middle coverage class under flat Rayleigh fading with two antennas.
The trial counts here are small enough to finish in well under a minute.
"""

import numpy as np

from nprach.harness import Scenario, calibrate, run_campaign

scn = Scenario.preset("C2", fading="flat_rayleigh", n_trials=200, master_seed=1)
thr = calibrate(scn, target_fa=1e-2, n_trials=1000, seed=2)
print(f"threshold for 1% false alarm: {thr:.3f}")

stats = run_campaign(scn, thr)
s = stats.summary()
print(f"{s['detections']}/{s['trials']} detected, {s['misdetections']} missed")
print(f"ToA error percentiles (us): { {k: round(v, 3) for k, v in stats.percentiles.items()} }")
print(f"within 3 us: {stats.fraction_within(3.0):.1%}")

# the same scenario in false-alarm mode transmits nothing
fa = run_campaign(scn.replace(mode="false_alarm", n_trials=500), thr)
print(f"false alarms: {fa.false_alarms}/{fa.trials}")
print("errors:", np.round(stats.toa_errors_us[:8], 3))
