"""
Filtering, breath cycles and respiratory rate
=============================================

The airflow is detrended and low-passed, breaths are cut at inspiration
onsets, and the cycle widths become an instantaneous rate series.
"""
import numpy as np

from tdasleep.features import BASELINE_NAMES, classical_features
from tdasleep.preprocess import detect_breaths, detrend_lowpass, irr
from tdasleep.synthetic import synthetic_subject

rec, ann = synthetic_subject("DEMO", minutes=4, seed=2)
flow = rec.channel("Airflow")
rate = flow.rate_hz
x = flow.samples[: int(180 * rate)]

y = detrend_lowpass(x, rate)
print(f"raw mean {x.mean():+.3f}, filtered mean {y.mean():+.2e}")

br = detect_breaths(y, rate)
print(f"{len(br.width_s)} breaths, width {br.width_s.mean():.2f} +/- {br.width_s.std():.2f} s")

# knots sit at the end of each cycle; the rate is held flat outside them
r = irr(br, duration_s=180.0)
print(f"IRR: {len(r)} samples, {r.min():.1f} .. {r.max():.1f} breaths/min")

values, flags = classical_features(br)
for name, v in zip(BASELINE_NAMES, values):
    print(f"  {name:<28s} {v: .4f}")
print("flags:", flags)

# a pure cosine gives identical cycles, so every dispersion feature is zero
t = np.arange(int(180 * rate)) / rate
tone = np.cos(2 * np.pi * 0.25 * (t - t.mean()))
v, _ = classical_features(detect_breaths(detrend_lowpass(tone, rate), rate))
print("cosine amplitude", round(v[0], 4), "peak IQR", f"{v[1]:.1e}")
