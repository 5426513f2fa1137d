"""End-to-end orchestration: recordings -> windows -> diagrams -> feature matrix.

Every run is a pure function of (inputs, config). Windows are processed in
any order, possibly in parallel, and rows are sorted by (subject_id,
epoch_index) before anything is written. Outputs are written only after the
whole run succeeded, each via a temporary file and an atomic rename.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import platform
import tempfile
import zlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy
import scipy.signal as sps

from . import __version__
from .config import PipelineConfig
from .curves import FitConstants, estimate_constants
from .diagram import DIAGRAM_KEYS, PersistenceDiagram, diagrams_from_csv, diagrams_to_csv
from .errors import (ConfigError, EmbeddingError, EmptyBreathsError, InputError,
                     MissingClassError)
from .features import (LABELS, assemble, class_weights, class_weights_from_counts,
                       classical_features, counts_per_fold, stratified_folds)
from .ingest import (EPOCH_S, HISTORY_EPOCHS, EpochWindow, read_annotations, read_csv_recording,
                     read_demographics, read_edf, screen_epochs)
from .preprocess import detect_breaths, detrend_lowpass, irr
from .report import format_table, residual_table
from .tda import maxmin_subsample, rips_persistence, sublevel_persistence, takens_embed

log = logging.getLogger(__name__)

CACHE_VERSION = "1"
SKIP_REASONS = ("stage", "history", "truncated", "events", "sqi", "breaths")
ID_COLUMNS = ("subject_id", "epoch_index", "label", "fold", "weight")

# Gradient-boosting settings used with these features; exported for reference only.
XGBOOST_PARAMS = {
    "learning_rate": 0.07, "n_estimators": 100, "max_depth": 4, "min_child_weight": 1,
    "gamma": 0, "subsample": 0.3, "colsample_bytree": 0.8, "objective": "multi:softprob",
    "eval_metric": "mlogloss", "seed": 999,
}


# ---------------------------------------------------------------- io helpers

def atomic_write(path, data):
    """Write text or bytes to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


@dataclass
class SubjectInput:
    subject_id: str
    recording_path: Path
    stages_path: Path
    events_path: Path | None
    demographics: tuple | None


def discover_subjects(data_dir) -> list:
    """Find ``<id>.edf`` (or ``<id>.csv``) recordings with their annotation files.

    Each recording needs ``<id>.stages.csv``; ``<id>.events.csv`` and a shared
    ``demographics.csv`` are optional. Everything is checked before any
    processing starts so a bad input never leaves partial output behind.
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise InputError(f"data directory {root} does not exist")
    demo = {}
    if (root / "demographics.csv").exists():
        demo = read_demographics(root / "demographics.csv")
    found = {}
    for p in sorted(root.iterdir()):
        name = p.name
        if name.endswith(".edf"):
            found.setdefault(name[:-4], p)
        elif name.endswith(".csv") and name.count(".") == 1 and name != "demographics.csv":
            found.setdefault(name[:-4], p)
    if not found:
        raise InputError(f"no recordings (*.edf or <id>.csv) in {root}")
    out = []
    for sid in sorted(found):
        stages = root / f"{sid}.stages.csv"
        if not stages.exists():
            raise InputError(f"missing annotations file {stages}")
        events = root / f"{sid}.events.csv"
        out.append(SubjectInput(sid, found[sid], stages, events if events.exists() else None,
                                demo.get(sid)))
    return out


def load_subject(si: SubjectInput, config: PipelineConfig):
    if si.recording_path.suffix == ".edf":
        rec = read_edf(si.recording_path)
        rec.subject_id = si.subject_id
    else:
        rec = read_csv_recording(si.recording_path, config.csv_rate_hz, config.airflow_channel,
                                 subject_id=si.subject_id)
    ann = read_annotations(si.stages_path, si.events_path, si.demographics)
    return rec, ann


# ---------------------------------------------------------------- per window

def window_seed(config: PipelineConfig, subject_id: str, epoch_index: int) -> int:
    """Subsampling seed for one window, derived from the single run seed."""
    ss = np.random.SeedSequence([config.seed, epoch_index, zlib.crc32(subject_id.encode())])
    return int(ss.generate_state(1)[0])


def _downsample(x, rate_hz, target_hz):
    if target_hz >= rate_hz:
        return np.asarray(x, dtype=float), float(rate_hz)
    frac = Fraction(float(target_hz) / float(rate_hz)).limit_denominator(1000)
    return sps.resample_poly(x, frac.numerator, frac.denominator), \
        float(rate_hz) * frac.numerator / frac.denominator


def window_diagrams(window: EpochWindow, config: PipelineConfig, filtered=None, breaths=None):
    """The four feature diagrams of one window, keyed by ``DIAGRAM_KEYS``.

    Sublevel H0 runs on the filtered airflow and on its IRR. Rips runs on the
    delay embedding (d = ``embed_dim``, tau = 1 s) of the airflow downsampled
    to ``airflow_downsample_hz``, after maxmin subsampling to
    ``rips_max_points``.
    """
    rate = window.rate_hz
    if filtered is None:
        filtered = detrend_lowpass(window.airflow, rate)
    if breaths is None:
        breaths = detect_breaths(filtered, rate)
    duration = len(window.airflow) / rate
    irr_sig = irr(breaths, duration, placement=config.irr_knots)
    out = {
        "sublevel_airflow_h0": sublevel_persistence(filtered, "sublevel_airflow"),
        "sublevel_irr_h0": sublevel_persistence(irr_sig, "sublevel_irr"),
    }
    low, low_rate = _downsample(filtered, rate, config.airflow_downsample_hz)
    tau = max(1, int(round(low_rate)))
    cloud = takens_embed(low, tau, config.embed_dim)
    k = min(config.rips_max_points, len(cloud))
    cloud = maxmin_subsample(cloud, k, window_seed(config, window.subject_id,
                                                     window.target_epoch_index))
    h0, h1 = rips_persistence(cloud, max_dim=1)
    out["rips_airflow_h0"] = h0
    out["rips_airflow_h1"] = h1
    return {key: out[key] for key in DIAGRAM_KEYS}


_DIAGRAM_FIELDS = ("airflow_downsample_hz", "rips_max_points", "embed_dim", "seed", "irr_knots")


def cache_key(window: EpochWindow, config: PipelineConfig) -> str:
    h = hashlib.sha256()
    h.update(f"v{CACHE_VERSION}|{window.subject_id}|{window.target_epoch_index}|"
             f"{window.rate_hz!r}|".encode())
    h.update(json.dumps({f: getattr(config, f) for f in _DIAGRAM_FIELDS},
                        sort_keys=True).encode())
    h.update(np.ascontiguousarray(window.airflow, dtype="<f8").tobytes())
    return h.hexdigest()


def _empty(key):
    source, dim = key.rsplit("_h", 1)
    return PersistenceDiagram(np.zeros((0, 2)), int(dim), source)


def diagrams_from_text(text) -> dict:
    got = {d.key: d for d in diagrams_from_csv(text)}
    return {key: got.get(key, _empty(key)) for key in DIAGRAM_KEYS}


@dataclass
class WindowResult:
    subject_id: str
    epoch_index: int
    label: str
    reason: str  # "emitted" or "breaths"
    columns: list | None = None
    values: np.ndarray | None = None
    flags: dict | None = None


def process_window(window: EpochWindow, config: PipelineConfig, constants: FitConstants,
                   cache_dir: str = "", diagram_dir: str = "") -> WindowResult:
    """Features of one window; windows without two full breath cycles are skipped."""
    filtered = detrend_lowpass(window.airflow, window.rate_hz)
    try:
        breaths = detect_breaths(filtered, window.rate_hz)
        baseline = classical_features(breaths)
    except EmptyBreathsError:
        return WindowResult(window.subject_id, window.target_epoch_index, window.label, "breaths")
    text = None
    cache_file = Path(cache_dir) / f"{cache_key(window, config)}.csv" if cache_dir else None
    if cache_file is not None and cache_file.exists():
        text = cache_file.read_text(encoding="utf-8")
        dgms = diagrams_from_text(text)
    else:
        try:
            dgms = window_diagrams(window, config, filtered, breaths)
        except EmbeddingError:
            return WindowResult(window.subject_id, window.target_epoch_index, window.label,
                                "breaths")
        text = diagrams_to_csv(dgms.values())
        if cache_file is not None:
            atomic_write(cache_file, text)
        # features always come from the canonical serialized form, so cached
        # and fresh runs agree to the last bit
        dgms = diagrams_from_text(text)
    if diagram_dir:
        atomic_write(Path(diagram_dir) / f"{window.subject_id}_{window.target_epoch_index:05d}.csv",
                     text)
    fv = assemble(window, dgms, constants, config.feature_blocks, config.n_coeffs,
                  baseline=baseline)
    return WindowResult(window.subject_id, window.target_epoch_index, window.label, "emitted",
                        fv.columns, fv.values, fv.flags)


def _job(args):
    return process_window(*args)


# ---------------------------------------------------------------- extract

def load_constants(config: PipelineConfig) -> FitConstants:
    if config.constants_path:
        return FitConstants.from_file(config.constants_path)
    return FitConstants.paper_defaults()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def _weights(labels) -> tuple:
    """Class weights, falling back to the present classes when one is absent."""
    counts = Counter(labels)
    try:
        return class_weights(labels), []
    except MissingClassError:
        missing = [c for c in LABELS if counts.get(c, 0) == 0]
        present = {c: counts[c] for c in LABELS if counts.get(c, 0) > 0}
        return (class_weights_from_counts(present) if present else {}), missing


def render_matrix(results, folds, weights, fmt="csv") -> str:
    """Feature matrix text; identical results always render to identical bytes."""
    emitted = [r for r in results if r.reason == "emitted"]
    if emitted:
        columns = emitted[0].columns
        flag_names = sorted(emitted[0].flags)
    else:
        columns, flag_names = [], []
    header = list(ID_COLUMNS) + columns + [f"flag.{f}" for f in flag_names]
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(",".join(header) + "\n")
    for r in emitted:
        row = [r.subject_id, r.epoch_index, r.label, folds[r.subject_id], weights.get(r.label, 0.0)]
        row += list(r.values) + [bool(r.flags[f]) for f in flag_names]
        cells = [_fmt(v) for v in row]
        if fmt == "csv":
            buf.write(",".join(cells) + "\n")
        else:
            obj = {}
            for name, v, cell in zip(header, row, cells):
                obj[name] = cell if isinstance(v, str) else json.loads(cell)
            buf.write(json.dumps(obj) + "\n")
    return buf.getvalue()


def _constants_record(constants: FitConstants) -> dict:
    body = {"hepc_scale": {k: constants.hepc_scale[k] for k in sorted(constants.hepc_scale)},
            "sp_domain": {k: list(constants.sp_domain[k]) for k in sorted(constants.sp_domain)}}
    digest = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]
    return {**body, "hash": digest}


def versions() -> dict:
    import numba
    return {"tdasleep": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def extract(config: PipelineConfig) -> dict:
    """Run the whole pipeline; returns the manifest (also written to disk).

    Writes ``features.csv`` (or ``features.ndjson``) and ``manifest.json`` to
    ``config.output_dir``.
    """
    if not config.data_dir:
        raise ConfigError("data_dir is required")
    if not config.output_dir:
        raise ConfigError("output_dir is required")
    subjects = discover_subjects(config.data_dir)
    constants = load_constants(config)
    loaded = [(si, *load_subject(si, config)) for si in subjects]

    jobs, accounting = [], {}
    for si, rec, ann in loaded:
        decisions, windows = screen_epochs(rec, ann, config)
        accounting[si.subject_id] = Counter(d.reason for d in decisions)
        jobs += [(w, config, constants, config.cache_dir, config.diagram_dir) for w in windows]

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=1))
    else:
        results = [_job(j) for j in jobs]
    results.sort(key=lambda r: (r.subject_id, r.epoch_index))

    for r in results:
        if r.reason != "emitted":
            acc = accounting[r.subject_id]
            acc["emitted"] -= 1
            acc[r.reason] += 1

    demo = [(si.subject_id, *(si.demographics or (-1, "U"))) for si in subjects]
    folds = stratified_folds(demo, config.folds, config.seed)
    labels = [r.label for r in results if r.reason == "emitted"]
    weights, missing = _weights(labels)
    fold_weights = []
    for f in range(config.folds):
        train = [r.label for r in results if r.reason == "emitted" and folds[r.subject_id] != f]
        fold_weights.append(_weights(train)[0])

    ext = "csv" if config.output_format == "csv" else "ndjson"
    matrix = render_matrix(results, folds, weights, config.output_format)

    per_subject = {}
    for si in subjects:
        acc = accounting[si.subject_id]
        skipped = {reason: int(acc.get(reason, 0)) for reason in SKIP_REASONS}
        per_subject[si.subject_id] = {
            "candidates": int(sum(acc.values())), "emitted": int(acc.get("emitted", 0)),
            "skipped": skipped, "fold": folds[si.subject_id],
        }
    emitted = [r for r in results if r.reason == "emitted"]
    manifest = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "constants": _constants_record(constants),
        "versions": versions(),
        "epoch_seconds": EPOCH_S,
        "history_epochs": HISTORY_EPOCHS,
        "feature_file": f"features.{ext}",
        "n_rows": len(emitted),
        "n_feature_columns": len(emitted[0].columns) if emitted else 0,
        "subjects": per_subject,
        "class_counts": {c: labels.count(c) for c in LABELS},
        "class_weights": weights,
        "missing_classes": missing,
        "fold_sizes": counts_per_fold(folds, config.folds),
        "fold_train_class_weights": fold_weights,
        "classifier_params": XGBOOST_PARAMS,
    }
    out = Path(config.output_dir)
    atomic_write(out / f"features.{ext}", matrix)
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------- other commands

def read_diagram_dir(diagram_dir) -> dict:
    """All diagrams below ``diagram_dir`` grouped by key; empty diagrams included."""
    root = Path(diagram_dir)
    if not root.is_dir():
        raise InputError(f"diagram directory {root} does not exist")
    files = sorted(root.glob("*.csv"))
    by_key = {}
    for p in files:
        for key, dgm in diagrams_from_text(p.read_text(encoding="utf-8")).items():
            by_key.setdefault(key, []).append(dgm)
    return by_key, len(files)


def constants(config: PipelineConfig, output_path) -> FitConstants:
    """Estimate fit constants from serialized diagrams in ``config.diagram_dir``."""
    if not config.diagram_dir:
        raise ConfigError("diagram_dir is required")
    by_key, n_files = read_diagram_dir(config.diagram_dir)
    if n_files == 0:
        raise InputError(f"no diagram files in {config.diagram_dir}")
    for key, dgms in by_key.items():
        if len(dgms) < config.constants_sample:
            log.warning("%s: %d diagrams available, fewer than the requested %d; using all",
                        key, len(dgms), config.constants_sample)
    fit = estimate_constants(by_key, config.constants_sample, config.seed)
    if not fit.hepc_scale and not fit.sp_domain:
        raise InputError("no diagram in the sample has a finite positive bar")
    buf = Path(output_path)
    tmp = buf.with_name(f".{buf.name}.tmp")
    fit.to_file(tmp)
    os.replace(tmp, buf)
    return fit


def residual_report(config: PipelineConfig, fmt: str = "csv") -> str:
    if not config.diagram_dir:
        raise ConfigError("diagram_dir is required")
    by_key, _ = read_diagram_dir(config.diagram_dir)
    rows = residual_table(by_key, load_constants(config), config.n_coeffs)
    return format_table(rows, fmt)


def folds_table(config: PipelineConfig) -> str:
    if not config.data_dir:
        raise ConfigError("data_dir is required")
    path = Path(config.data_dir) / "demographics.csv"
    if not path.exists():
        raise InputError(f"missing demographics file {path}")
    demo = read_demographics(path)
    folds = stratified_folds([(s, a, x) for s, (a, x) in sorted(demo.items())],
                             config.folds, config.seed)
    lines = ["subject_id,age_years,sex,fold"]
    lines += [f"{s},{demo[s][0]},{demo[s][1]},{folds[s]}" for s in sorted(demo)]
    return "\n".join(lines) + "\n"
