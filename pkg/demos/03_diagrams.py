"""
Persistence diagrams of one window
==================================

Rips persistence of a delay embedding, and sublevel persistence of the
filtered airflow and of its respiratory rate.
"""
import numpy as np

from tdasleep.config import PipelineConfig
from tdasleep.ingest import build_windows
from tdasleep.synthetic import synthetic_subject
from tdasleep.tda import maxmin_subsample, rips_persistence, sublevel_persistence, takens_embed
from tdasleep.pipeline import window_diagrams

# a square has one loop, born at the side length and filled at the diagonal
square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
h0, h1 = rips_persistence(square)
print("square H0:", h0.expanded().tolist())
print("square H1:", h1.expanded().tolist())

# a noisy circle: one long H1 bar
theta = np.linspace(0, 2 * np.pi, 80, endpoint=False)
rng = np.random.default_rng(0)
circle = np.column_stack([np.cos(theta), np.sin(theta)]) + 0.03 * rng.normal(size=(80, 2))
_, h1 = rips_persistence(circle)
life = h1.deaths - h1.births
print(f"circle: {len(h1)} H1 bars, longest {life.max():.3f}")

# each local minimum starts a component; plateaus count once
f = np.array([3.0, 1.0, 2.0, 2.0, 0.0, 4.0, 1.0, 1.0, 5.0])
print("sublevel:", sublevel_persistence(f).expanded().tolist())

# a delay embedding of a sine traces a loop
t = np.arange(512) / 8.0
cloud = takens_embed(np.sin(2 * np.pi * 0.25 * t), tau_samples=8, d=3)
sub = maxmin_subsample(cloud, 128, seed=0)
print(f"embedding {cloud.points.shape} -> landmarks {sub.points.shape}")

rec, ann = synthetic_subject("DEMO", minutes=6, seed=3)
window = build_windows(rec, ann)[0]
for key, dgm in window_diagrams(window, PipelineConfig()).items():
    fin = dgm.finite()
    print(f"{key:<22s} {len(dgm):4d} bars, d_max {dgm.d_max:.4g}, "
          f"longest finite {np.max(fin.deaths - fin.births, initial=0):.4g}")
