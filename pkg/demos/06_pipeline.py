"""
From EDF files to a feature matrix
==================================

Runs the batch pipeline and the command line on a synthetic cohort.
"""
import csv
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from tdasleep.config import PipelineConfig
from tdasleep.pipeline import extract
from tdasleep.synthetic import write_synthetic_bundle

root = Path(tempfile.mkdtemp())
write_synthetic_bundle(root / "data", n_subjects=2, minutes=6, seed=7)

config = PipelineConfig(data_dir=str(root / "data"), output_dir=str(root / "out"),
                        cache_dir=str(root / "cache"), diagram_dir=str(root / "dgms"))
manifest = extract(config)
print(json.dumps({k: manifest[k] for k in ("n_rows", "n_feature_columns", "class_counts")}))
for sid, s in manifest["subjects"].items():
    print(sid, "emitted", s["emitted"], "skipped", s["skipped"], "fold", s["fold"])

with open(root / "out" / "features.csv", newline="") as fh:
    header = next(csv.reader(fh))
print(header[:7], "...", header[-2:])

# the same run from the shell; a missing directory is an input error
cli = [sys.executable, "-m", "tdasleep.cli"]
proc = subprocess.run(cli + ["residual-report", "--diagram-dir", str(root / "dgms"),
                             "--format", "text"], capture_output=True, text=True)
print(proc.stdout)
proc = subprocess.run(cli + ["folds", "--data-dir", str(root / "nope")],
                      capture_output=True, text=True)
print("exit", proc.returncode, proc.stderr.strip())
