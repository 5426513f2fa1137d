"""
Recordings, stages and candidate windows
========================================

A synthetic night is written as EDF plus stage and event tables, read back,
and cut into six-epoch airflow windows. Each skipped epoch carries a reason.
"""
import tempfile
from collections import Counter
from pathlib import Path

from tdasleep.ingest import read_annotations, read_edf, screen_epochs
from tdasleep.synthetic import write_synthetic_bundle

root = Path(tempfile.mkdtemp())
write_synthetic_bundle(root, n_subjects=1, minutes=10, seed=1)
print(sorted(p.name for p in root.iterdir()))

rec = read_edf(root / "SYN001.edf")
flow = rec.channel("Airflow")
print(f"{len(rec.channels)} channels, {rec.duration_s:.0f} s, airflow at {flow.rate_hz:g} Hz")

ann = read_annotations(root / "SYN001.stages.csv", root / "SYN001.events.csv")
print("stages:", dict(Counter(ann.stages)))
print("events:", [(e.kind, e.start_s, e.end_s) for e in ann.events])

# the first five epochs never have a full history; apneas remove every
# window that touches them
decisions, windows = screen_epochs(rec, ann)
print("decisions:", dict(Counter(d.reason for d in decisions)))

w = windows[0]
print(f"first window: epoch {w.target_epoch_index}, label {w.label}, "
      f"{len(w.airflow)} samples from t={w.start_s:.0f} s, SQI {w.sqi:.3f}")
