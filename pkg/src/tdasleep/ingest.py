"""Recording and annotation parsing, signal quality, and window assembly."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import (CalibrationError, ChannelMissingError, InputError, ParseError,
                     TruncationError)

EPOCH_S = 30.0
HISTORY_EPOCHS = 5
STAGES = ("Wake", "NREM", "REM")
ALL_STAGES = STAGES + ("Unknown",)
EVENT_KINDS = ("central_apnea", "mixed_apnea", "obstructive_apnea", "hypopnea",
               "desaturation", "other")
# every annotated event kind excludes overlapping windows by default
EXCLUDED_EVENTS = EVENT_KINDS


@dataclass
class Channel:
    name: str
    rate_hz: float
    samples: np.ndarray

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz


@dataclass
class Recording:
    channels: list
    subject_id: str = ""
    start_time: str = ""
    header: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for ch in self.channels:
            if ch.rate_hz <= 0:
                raise InputError(f"channel {ch.name!r}: rate must be positive")
            if len(ch.samples) == 0:
                raise InputError(f"channel {ch.name!r} is empty")

    def channel(self, name: str) -> Channel:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise ChannelMissingError(f"no channel named {name!r} in recording "
                                  f"{self.subject_id!r}")

    @property
    def duration_s(self) -> float:
        return max(ch.duration_s for ch in self.channels)


@dataclass(frozen=True)
class Event:
    kind: str
    start_s: float
    end_s: float


@dataclass
class AnnotationSet:
    stages: list
    events: list = field(default_factory=list)
    age_years: int | None = None
    sex: str | None = None

    def __post_init__(self):
        for st in self.stages:
            if st not in ALL_STAGES:
                raise InputError(f"unknown stage label {st!r}")
        for ev in self.events:
            if not (ev.end_s > ev.start_s >= 0):
                raise InputError(f"bad event interval {ev}")


@dataclass
class EpochWindow:
    subject_id: str
    target_epoch_index: int
    airflow: np.ndarray
    rate_hz: float
    label: str
    sqi: float

    @property
    def start_s(self) -> float:
        return EPOCH_S * (self.target_epoch_index - HISTORY_EPOCHS)


# ---------------------------------------------------------------- EDF

_MAIN_FIELDS = (("version", 8), ("patient", 80), ("recording", 80), ("startdate", 8),
                ("starttime", 8), ("header_bytes", 8), ("reserved", 44),
                ("n_records", 8), ("record_duration", 8), ("n_signals", 4))
_SIGNAL_FIELDS = (("label", 16), ("transducer", 80), ("physical_dimension", 8),
                  ("physical_min", 8), ("physical_max", 8), ("digital_min", 8),
                  ("digital_max", 8), ("prefiltering", 80), ("samples_per_record", 8),
                  ("reserved", 32))


def _num(raw: str, what: str, offset: int, kind=float):
    try:
        return kind(raw.strip())
    except ValueError:
        raise ParseError(f"bad {what} field {raw!r} at byte {offset}", offset=offset) from None


def read_edf(path) -> Recording:
    """Parse an EDF file into physical units.

    Raw header fields are kept verbatim in ``Recording.header`` (``"main"``
    and ``"signals"``) so :func:`write_edf` can reproduce them byte for byte.
    """
    data = Path(path).read_bytes()
    if len(data) < 256:
        raise ParseError(f"file shorter than the 256-byte main header ({len(data)} bytes)",
                         offset=len(data))
    main, off = {}, 0
    for name, width in _MAIN_FIELDS:
        main[name] = data[off:off + width].decode("ascii", errors="replace")
        off += width
    ns = _num(main["n_signals"], "number of signals", 252, int)
    if ns < 1:
        raise ParseError("EDF declares no signals", offset=252)
    header_bytes = _num(main["header_bytes"], "header size", 184, int)
    expected = 256 * (ns + 1)
    if header_bytes != expected:
        raise ParseError(f"header size field says {header_bytes}, expected {expected}",
                         offset=184)
    if len(data) < expected:
        raise ParseError(f"signal headers truncated at byte {len(data)}", offset=len(data))
    sigs = [dict() for _ in range(ns)]
    for name, width in _SIGNAL_FIELDS:
        for s in range(ns):
            sigs[s][name] = data[off:off + width].decode("ascii", errors="replace")
            off += width
    n_records = _num(main["n_records"], "record count", 236, int)
    rec_dur = _num(main["record_duration"], "record duration", 244)
    spr = [_num(s["samples_per_record"], "samples per record", 0, int) for s in sigs]
    rec_len = sum(spr)
    body = data[expected:]
    if n_records < 0:
        n_records = len(body) // (2 * rec_len)
    need = n_records * rec_len * 2
    if len(body) < need:
        raise TruncationError(f"data record {len(body) // (2 * rec_len)} is truncated",
                              record_index=len(body) // (2 * rec_len))
    raw = np.frombuffer(body[:need], dtype="<i2").reshape(n_records, rec_len)
    channels, col = [], 0
    for s, hdr in zip(spr, sigs):
        dmin = _num(hdr["digital_min"], "digital minimum", 0)
        dmax = _num(hdr["digital_max"], "digital maximum", 0)
        pmin = _num(hdr["physical_min"], "physical minimum", 0)
        pmax = _num(hdr["physical_max"], "physical maximum", 0)
        label = hdr["label"].strip()
        if dmax == dmin or pmax == pmin:
            raise CalibrationError(f"signal {label!r} has a zero-width calibration range")
        dig = raw[:, col:col + s].reshape(-1).astype(float)
        col += s
        phys = (dig - dmin) * (pmax - pmin) / (dmax - dmin) + pmin
        channels.append(Channel(label, s / rec_dur, phys))
    return Recording(channels, main["patient"].strip(),
                     f"{main['startdate']} {main['starttime']}",
                     header={"main": main, "signals": sigs})


def _field(value, width):
    text = str(value)
    if len(text) > width:
        raise ValueError(f"{text!r} does not fit in {width} bytes")
    return text.ljust(width).encode("ascii")


def _short_number(x: float, width: int = 8) -> str:
    """Shortest-loss decimal text of ``x`` fitting an EDF numeric field."""
    for digits in range(width, 0, -1):
        text = f"{x:.{digits}g}"
        if len(text) <= width:
            return text
    raise ValueError(f"cannot fit {x} into {width} characters")


def _bound_text(x: float, lower: bool) -> str:
    # 8-character text whose value does not cut into the data range
    text = _short_number(x)
    step = 0.0
    while (float(text) > x) if lower else (float(text) < x):
        step = max(2 * step, abs(x) * 1e-7, 1e-300)
        text = _short_number(x - step if lower else x + step)
    return text


def write_edf(path, channels, record_duration: float = 1.0, subject_id: str = "X",
              startdate: str = "01.01.20", starttime: str = "00.00.00", header=None):
    """Write channels as a 16-bit EDF file.

    Each channel's physical range is taken from its data and mapped onto the
    full int16 range. If ``header`` (as produced by :func:`read_edf`) is given,
    its raw fields are written back unchanged along with the channels' digital
    values, which reproduces the original file.
    """
    if header is not None:
        main, sigs = header["main"], header["signals"]
        digital = []
        for ch, hdr in zip(channels, sigs):
            dmin, dmax = float(hdr["digital_min"]), float(hdr["digital_max"])
            pmin, pmax = float(hdr["physical_min"]), float(hdr["physical_max"])
            dig = (np.asarray(ch.samples) - pmin) * (dmax - dmin) / (pmax - pmin) + dmin
            digital.append(np.round(dig).astype("<i2"))
    else:
        main = {"version": "0", "patient": subject_id, "recording": "",
                "startdate": startdate, "starttime": starttime,
                "header_bytes": str(256 * (len(channels) + 1)), "reserved": "",
                "n_records": "", "record_duration": _short_number(record_duration),
                "n_signals": str(len(channels))}
        sigs, digital = [], []
        n_records = None
        for ch in channels:
            spr = ch.rate_hz * record_duration
            if abs(spr - round(spr)) > 1e-9:
                raise ValueError(f"{ch.name}: rate x record duration must be an integer")
            spr = int(round(spr))
            nrec = len(ch.samples) // spr
            if len(ch.samples) % spr:
                raise ValueError(f"{ch.name}: length is not a whole number of records")
            if n_records is None:
                n_records = nrec
            elif n_records != nrec:
                raise ValueError("channels disagree on the number of records")
            x = np.asarray(ch.samples, dtype=float)
            pmin, pmax = float(x.min()), float(x.max())
            if pmax == pmin:
                pmin, pmax = pmin - 1.0, pmax + 1.0
            pmin_s = _bound_text(pmin, lower=True)
            pmax_s = _bound_text(pmax, lower=False)
            pmin, pmax = float(pmin_s), float(pmax_s)
            dmin, dmax = -32768, 32767
            dig = np.round((x - pmin) * (dmax - dmin) / (pmax - pmin) + dmin)
            digital.append(np.clip(dig, dmin, dmax).astype("<i2"))
            sigs.append({"label": ch.name, "transducer": "", "physical_dimension": "",
                         "physical_min": pmin_s, "physical_max": pmax_s,
                         "digital_min": str(dmin), "digital_max": str(dmax),
                         "prefiltering": "", "samples_per_record": str(spr),
                         "reserved": ""})
        main["n_records"] = str(n_records)
    out = bytearray()
    for name, width in _MAIN_FIELDS:
        out += _field(main[name], width)
    for name, width in _SIGNAL_FIELDS:
        for hdr in sigs:
            out += _field(hdr[name], width)
    n_records = int(str(main["n_records"]).strip())
    blocks = [d.reshape(n_records, -1) for d in digital]
    out += np.concatenate(blocks, axis=1).astype("<i2").tobytes()
    Path(path).write_bytes(bytes(out))


# ---------------------------------------------------------------- CSV

def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv_recording(path, rate_hz: float, name: str = "Airflow",
                       subject_id: str = "") -> Recording:
    """Read a single-channel recording from ``value`` or ``time_s,value`` rows.

    A first row with no numeric cell is taken as a header. Line numbers in
    errors are 1-based file lines.
    """
    if not rate_hz > 0:
        raise InputError("rate_hz must be positive")
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not any(_is_number(c) for c in row):
                continue
            if len(row) not in (1, 2):
                raise ParseError(f"line {lineno}: expected 1 or 2 columns, got {len(row)}",
                                 line=lineno)
            try:
                values.append(float(row[-1]))
                if len(row) == 2:
                    float(row[0])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric value in {row!r}",
                                 line=lineno) from None
    if not values:
        raise ParseError(f"{path}: no samples", line=0)
    return Recording([Channel(name, float(rate_hz), np.asarray(values))], subject_id)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [r for r in csv.DictReader(fh)]


def read_annotations(stages_path, events_path=None, demographics=None) -> AnnotationSet:
    """Load stage labels (``epoch_index,stage``) and events (``kind,start_s,end_s``).

    Epochs missing from the stage file are marked Unknown. ``demographics`` is
    an optional ``(age_years, sex)`` pair.
    """
    try:
        srows = _rows(stages_path)
        staged = {int(r["epoch_index"]): r["stage"].strip() for r in srows}
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{stages_path}: bad stage table ({exc})") from exc
    n = max(staged) + 1 if staged else 0
    stages = [staged.get(i, "Unknown") for i in range(n)]
    events = []
    if events_path is not None and Path(events_path).exists():
        try:
            for r in _rows(events_path):
                events.append(Event(r["kind"].strip(), float(r["start_s"]), float(r["end_s"])))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{events_path}: bad event table ({exc})") from exc
    age, sex = demographics if demographics else (None, None)
    return AnnotationSet(stages, events, age, sex)


def read_demographics(path) -> dict:
    """``subject_id -> (age_years, sex)`` from a demographics CSV."""
    out = {}
    try:
        for r in _rows(path):
            out[r["subject_id"].strip()] = (int(r["age_years"]), r["sex"].strip())
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad demographics table ({exc})") from exc
    return out


def write_annotations(stages_path, events_path, annotations: AnnotationSet):
    with open(stages_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch_index", "stage"])
        w.writerows(enumerate(annotations.stages))
    with open(events_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "start_s", "end_s"])
        for ev in annotations.events:
            w.writerow([ev.kind, repr(ev.start_s), repr(ev.end_s)])


# ---------------------------------------------------------------- quality

SQI_BAND = (0.1, 1.2)
SQI_TOTAL_BAND = (0.05, 2.0)
SQI_HALF_WIDTH_HZ = 0.05


def sqi(epoch_signal, rate_hz: float) -> float:
    """Spectral concentration of respiration in one epoch, in [0, 1].

    Periodogram of the linearly detrended epoch; the peak bin is searched in
    0.1-1.2 Hz and the index is the power within +-0.05 Hz of it over the
    power in 0.05-2.0 Hz. A signal without power in that band scores 0.
    """
    x = np.asarray(epoch_signal, dtype=float)
    resid = sps.detrend(x, type="linear")
    # a line (constant included) leaves only round-off behind
    if not np.max(np.abs(resid), initial=0.0) > 1e-9 * np.max(np.abs(x), initial=0.0):
        return 0.0
    freqs, power = sps.periodogram(resid, fs=rate_hz, detrend=False, window="boxcar")
    total_mask = (freqs >= SQI_TOTAL_BAND[0]) & (freqs <= SQI_TOTAL_BAND[1])
    total = float(power[total_mask].sum())
    if not total > 0:
        return 0.0
    band = np.flatnonzero((freqs >= SQI_BAND[0]) & (freqs <= SQI_BAND[1]))
    if band.size == 0:
        return 0.0
    peak = freqs[band[np.argmax(power[band])]]
    near = total_mask & (np.abs(freqs - peak) <= SQI_HALF_WIDTH_HZ + 1e-12)
    return float(min(1.0, power[near].sum() / total))


# ---------------------------------------------------------------- windows

@dataclass(frozen=True)
class EpochDecision:
    """Why a candidate epoch was emitted or skipped."""

    epoch_index: int
    reason: str  # "emitted", "stage", "history", "events", "sqi", "truncated"
    sqi: float = math.nan


def _overlaps(a0, a1, b0, b1) -> bool:
    # half-open [a0, a1) vs [b0, b1)
    return a0 < b1 and b0 < a1


def screen_epochs(recording: Recording, annotations: AnnotationSet, config=None,
                  airflow_channel: str | None = None):
    """Decide for every scored epoch whether it yields a window.

    Returns ``(decisions, windows)``. Checks run in order: stage label,
    history, recording length, event overlap with the 180 s span, SQI.
    """
    threshold = getattr(config, "sqi_threshold", 0.25)
    name = airflow_channel or getattr(config, "airflow_channel", "Airflow")
    excluded = set(getattr(config, "excluded_events", EXCLUDED_EVENTS))
    ch = recording.channel(name)
    per_epoch = ch.rate_hz * EPOCH_S
    if abs(per_epoch - round(per_epoch)) > 1e-6:
        raise InputError("airflow rate must give a whole number of samples per epoch")
    per_epoch = int(round(per_epoch))
    events = [e for e in annotations.events if e.kind in excluded]
    decisions, windows = [], []
    for i, stage in enumerate(annotations.stages):
        if stage not in STAGES:
            decisions.append(EpochDecision(i, "stage"))
            continue
        if i < HISTORY_EPOCHS:
            decisions.append(EpochDecision(i, "history"))
            continue
        lo, hi = (i - HISTORY_EPOCHS) * per_epoch, (i + 1) * per_epoch
        if hi > len(ch.samples):
            decisions.append(EpochDecision(i, "truncated"))
            continue
        t0, t1 = EPOCH_S * (i - HISTORY_EPOCHS), EPOCH_S * (i + 1)
        if any(_overlaps(t0, t1, e.start_s, e.end_s) for e in events):
            decisions.append(EpochDecision(i, "events"))
            continue
        q = sqi(ch.samples[i * per_epoch:hi], ch.rate_hz)
        if q < threshold:
            decisions.append(EpochDecision(i, "sqi", q))
            continue
        decisions.append(EpochDecision(i, "emitted", q))
        windows.append(EpochWindow(recording.subject_id, i, ch.samples[lo:hi].copy(),
                                   ch.rate_hz, stage, q))
    return decisions, windows


def build_windows(recording: Recording, annotations: AnnotationSet, config=None,
                  airflow_channel: str | None = None) -> list:
    """Six-epoch airflow windows (target epoch plus five predecessors).

    Epoch ``i`` is emitted iff ``i >= 5``, its stage is Wake/NREM/REM, no
    excluded event overlaps ``[30(i-5), 30(i+1))`` seconds (half-open
    intervals on both sides) and the target epoch's SQI reaches the
    configured threshold (0.25 by default).
    """
    return screen_epochs(recording, annotations, config, airflow_channel)[1]
