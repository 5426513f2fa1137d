"""Synthetic recordings and diagram corpora for tests and demos.

Nothing here is physiologically calibrated. Subjects breathe at
stage-dependent rates with slow rate and amplitude drift, and carry a few
injected events and a noise burst so every skip path of the pipeline is hit.
Diagram corpora mimic the scale of the four diagram sources seen on
pediatric nasal-cannula airflow (median/extreme supports).
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .diagram import PersistenceDiagram
from .ingest import EPOCH_S, AnnotationSet, Channel, Event, Recording, write_annotations, write_edf

# stage -> (mean breaths/min, rate jitter, amplitude)
_STAGE_BREATHING = {
    "Wake": (20.0, 0.25, 1.2e-3),
    "NREM": (14.0, 0.03, 8e-4),
    "REM": (17.0, 0.15, 6e-4),
    "Unknown": (16.0, 0.1, 8e-4),
}


def _stage_plan(n_epochs: int, rng) -> list:
    plan = ["Wake"] * 4
    while len(plan) < n_epochs:
        stage = rng.choice(["NREM", "NREM", "REM", "Wake"])
        plan += [str(stage)] * int(rng.integers(3, 9))
    plan = plan[:n_epochs]
    plan[int(rng.integers(6, n_epochs))] = "Unknown"
    return plan


def _smooth_noise(n, rate_hz, corr_s, rng):
    step = max(1, int(corr_s * rate_hz))
    coarse = rng.normal(size=n // step + 2)
    t = np.arange(n) / step
    return np.interp(t, np.arange(len(coarse)), coarse)


def synthetic_subject(subject_id: str, minutes: float = 20.0, rate_hz: int = 256, seed=0,
                      apnea_at_s: float | None = None, noisy_epoch: int | None = None):
    """One synthetic subject: ``(Recording, AnnotationSet)``.

    An obstructive apnea (airflow reduced to 5 % for 15 s) and a following
    desaturation event are placed at ``apnea_at_s`` (default: a third of the
    way in). ``noisy_epoch`` (default: two thirds in) is overwritten with broadband
    noise so its SQI falls under threshold.
    """
    rng = np.random.default_rng(seed)
    n_epochs = int(minutes * 60 / EPOCH_S)
    n = int(n_epochs * EPOCH_S * rate_hz)
    plan = _stage_plan(n_epochs, rng)
    per = int(EPOCH_S * rate_hz)
    mean_rate = np.repeat([_STAGE_BREATHING[s][0] for s in plan], per)
    jitter = np.repeat([_STAGE_BREATHING[s][1] for s in plan], per)
    amp = np.repeat([_STAGE_BREATHING[s][2] for s in plan], per)
    # smooth stage transitions over ~10 s
    kernel = np.ones(10 * rate_hz) / (10 * rate_hz)
    mean_rate = np.convolve(mean_rate, kernel, mode="same")
    amp = np.convolve(amp, kernel, mode="same")
    freq = mean_rate / 60.0 * (1 + jitter * _smooth_noise(n, rate_hz, 8.0, rng))
    freq = np.clip(freq, 0.12, 1.0)
    phase = 2 * np.pi * np.cumsum(freq) / rate_hz
    amp = amp * (1 + 0.15 * _smooth_noise(n, rate_hz, 20.0, rng))
    flow = amp * (np.sin(phase) + 0.25 * np.sin(2 * phase + 0.6))
    flow += 0.03 * np.median(amp) * rng.normal(size=n)
    flow += 2e-4 * np.linspace(-1, 1, n)  # slow baseline drift

    if apnea_at_s is None:
        apnea_at_s = float(np.round(n_epochs * EPOCH_S / 3, 1))
    i0, i1 = int(apnea_at_s * rate_hz), int((apnea_at_s + 15) * rate_hz)
    flow[i0:i1] *= 0.05
    events = [Event("obstructive_apnea", apnea_at_s, apnea_at_s + 15.0),
              Event("desaturation", apnea_at_s + 12.0, apnea_at_s + 30.0)]
    if noisy_epoch is None:
        noisy_epoch = int(2 * n_epochs / 3)
    if 0 <= noisy_epoch < n_epochs:
        seg = slice(noisy_epoch * per, (noisy_epoch + 1) * per)
        flow[seg] = 2 * np.median(amp) * rng.normal(size=per)

    spo2_rate = 1
    spo2 = 97.0 + 0.5 * _smooth_noise(n_epochs * int(EPOCH_S), 1, 30.0, rng)
    d0 = int(apnea_at_s + 12)
    spo2[d0:d0 + 18] -= 4.0
    rec = Recording([Channel("Airflow", float(rate_hz), flow),
                     Channel("SpO2", float(spo2_rate), spo2)], subject_id)
    age = int(rng.integers(2, 18))
    sex = str(rng.choice(["M", "F"]))
    return rec, AnnotationSet(plan, events, age, sex)


def write_synthetic_bundle(out_dir, n_subjects: int = 3, minutes: float = 20.0, seed: int = 0):
    """Write EDF recordings, stage/event tables and a demographics table.

    Files per subject ``S``: ``S.edf``, ``S.stages.csv``, ``S.events.csv``;
    plus ``demographics.csv``. Returns the list of subject ids.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(seed).spawn(n_subjects)
    ids, demo = [], []
    for k, ss in enumerate(seeds):
        sid = f"SYN{k + 1:03d}"
        rec, ann = synthetic_subject(sid, minutes, seed=ss)
        write_edf(out / f"{sid}.edf", rec.channels, subject_id=sid)
        write_annotations(out / f"{sid}.stages.csv", out / f"{sid}.events.csv", ann)
        ids.append(sid)
        demo.append((sid, ann.age_years, ann.sex))
    with open(out / "demographics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "age_years", "sex"])
        w.writerows(demo)
    return ids


# Median / spread targets per diagram source: (median d_min, median d_max)
PAPER_SCALES = {
    "rips_airflow_h0": (0.0, 1.304e-4),
    "rips_airflow_h1": (8.250e-5, 2.867e-4),
    "sublevel_airflow_h0": (-6.366e-4, 6.668e-4),
    "sublevel_irr_h0": (11.973, 32.762),
}


def random_diagram(key: str, rng, spread: float = 0.5) -> PersistenceDiagram:
    """One random diagram resembling ``key`` at the scales in ``PAPER_SCALES``."""
    s = float(np.exp(rng.normal(0.0, spread)))
    if key == "rips_airflow_h0":
        top = PAPER_SCALES[key][1] * s
        k = int(rng.integers(30, 150))
        deaths = top * np.sort(rng.beta(2.0, 5.0, size=k))
        deaths[-1] = top
        bars = np.column_stack([np.zeros(k), deaths])
        bars = np.vstack([bars, [0.0, np.inf]])
        return PersistenceDiagram(bars, 0, "rips_airflow")
    if key == "rips_airflow_h1":
        lo, hi = PAPER_SCALES[key]
        k = int(rng.integers(2, 25))
        births = lo * s * rng.uniform(1.0, 1.8, size=k)
        life = (hi - lo) * s * rng.exponential(0.25, size=k)
        life[0] = (hi - lo) * s
        births[0] = lo * s
        return PersistenceDiagram(np.column_stack([births, births + life]), 1, "rips_airflow")
    if key == "sublevel_airflow_h0":
        lo, hi = PAPER_SCALES[key]
        k = int(rng.integers(20, 70))
        births = lo * s * rng.uniform(0.6, 1.0, size=k)
        deaths = hi * s * rng.uniform(0.6, 1.0, size=k)
        small = int(rng.integers(0, 20))
        sb = rng.uniform(lo * s, hi * s, size=small)
        sd = sb + (hi - lo) * s * rng.exponential(0.02, size=small)
        bars = np.vstack([np.column_stack([births, deaths]), np.column_stack([sb, sd]),
                          [[lo * s * 1.05, np.inf]]])
        return PersistenceDiagram(bars, 0, "sublevel_airflow")
    if key == "sublevel_irr_h0":
        lo, hi = PAPER_SCALES[key]
        center = 0.5 * (lo + hi) * s
        half = 0.5 * (hi - lo) * s
        k = int(rng.integers(5, 30))
        births = center - half * rng.uniform(0.2, 1.0, size=k)
        deaths = np.maximum(births + 1e-3, center + half * rng.uniform(-0.5, 1.0, size=k))
        return PersistenceDiagram(np.vstack([np.column_stack([births, deaths]),
                                             [[births.min(), np.inf]]]), 0, "sublevel_irr")
    raise KeyError(key)


def random_corpus(key: str, n: int, seed=0, spread: float = 0.5) -> list:
    rng = np.random.default_rng(seed)
    return [random_diagram(key, rng, spread) for _ in range(n)]
