import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import raw_edf, spectral_sqi
from tdasleep.errors import (CalibrationError, ChannelMissingError, InputError, ParseError,
                             TruncationError)
from tdasleep.ingest import (AnnotationSet, Channel, Event, Recording, build_windows,
                             read_annotations, read_csv_recording, read_demographics, read_edf,
                             screen_epochs, sqi, write_annotations, write_edf)


def _digital(n, seed=0):
    return np.random.default_rng(seed).integers(-32768, 32768, size=n).astype(np.int16)


# ---------------------------------------------------------------- EDF

def test_single_channel_ten_records(tmp_path):
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf([_digital(2560)], [256]))
    rec = read_edf(p)
    assert len(rec.channels) == 1
    assert len(rec.channels[0].samples) == 2560
    assert rec.channels[0].rate_hz == 256


def test_calibration_formula(tmp_path):
    dig = _digital(512, seed=1)
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf([dig], [256], phys=(-5, 15), dig=(-2048, 2047)))
    got = read_edf(p).channels[0].samples
    want = (dig.astype(float) + 2048) * 20 / 4095 - 5
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_three_rates(tmp_path):
    sigs = [_digital(256 * 4, 2), _digital(32 * 4, 3), _digital(4 * 4, 4)]
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf(sigs, [256, 32, 4], labels=["Airflow", "Thor", "SpO2"]))
    rec = read_edf(p)
    assert [c.rate_hz for c in rec.channels] == [256, 32, 4]
    durations = [c.duration_s for c in rec.channels]
    assert max(durations) - min(durations) <= 1 / 4
    for ch, dig in zip(rec.channels, sigs):
        np.testing.assert_allclose(ch.samples, (dig + 32768.0) * 2 / 65535 - 1, atol=1e-12)
    assert rec.channel("Thor").rate_hz == 32


def test_zero_width_digital_range(tmp_path):
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf([_digital(256)], [256], dig=(100, 100)))
    with pytest.raises(CalibrationError):
        read_edf(p)


def test_zero_width_physical_range(tmp_path):
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf([_digital(256)], [256], phys=(3, 3)))
    with pytest.raises(CalibrationError):
        read_edf(p)


def test_short_header_reports_offset(tmp_path):
    p = tmp_path / "a.edf"
    p.write_bytes(raw_edf([_digital(256)], [256])[:100])
    with pytest.raises(ParseError) as info:
        read_edf(p)
    assert info.value.offset == 100


def test_bad_header_size_field(tmp_path):
    data = bytearray(raw_edf([_digital(256)], [256]))
    data[184:192] = b"999     "
    p = tmp_path / "a.edf"
    p.write_bytes(bytes(data))
    with pytest.raises(ParseError) as info:
        read_edf(p)
    assert info.value.offset == 184


def test_non_numeric_header_field(tmp_path):
    data = bytearray(raw_edf([_digital(256)], [256]))
    data[236:244] = b"ten     "
    p = tmp_path / "a.edf"
    p.write_bytes(bytes(data))
    with pytest.raises(ParseError) as info:
        read_edf(p)
    assert info.value.offset == 236


def test_truncated_record_named(tmp_path):
    data = raw_edf([_digital(2560)], [256])
    p = tmp_path / "a.edf"
    p.write_bytes(data[:512 + 2 * 256 * 7 + 10])
    with pytest.raises(TruncationError) as info:
        read_edf(p)
    assert info.value.record_index == 7


def test_header_round_trip_is_byte_exact(tmp_path):
    src = raw_edf([_digital(512, 5), _digital(64, 6)], [256, 32], labels=["Airflow", "X"],
                  phys=(-3.5, 7.25))
    a = tmp_path / "a.edf"
    a.write_bytes(src)
    rec = read_edf(a)
    b = tmp_path / "b.edf"
    write_edf(b, rec.channels, header=rec.header)
    assert b.read_bytes() == src


def test_writer_reader_round_trip_within_quantization(tmp_path):
    rng = np.random.default_rng(7)
    x = rng.normal(size=256 * 6) * 1e-3
    y = rng.uniform(90, 100, size=6)
    p = tmp_path / "a.edf"
    write_edf(p, [Channel("Airflow", 256.0, x), Channel("SpO2", 1.0, y)])
    rec = read_edf(p)
    for ch, orig in zip(rec.channels, (x, y)):
        step = (orig.max() - orig.min()) / 65535
        assert np.max(np.abs(ch.samples - orig)) <= step * 1.01


def test_missing_channel(tmp_path):
    rec = Recording([Channel("Thor", 4.0, np.zeros(8))], "S")
    with pytest.raises(ChannelMissingError):
        rec.channel("Airflow")


# ---------------------------------------------------------------- CSV

def test_csv_single_column(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("\n".join(str(i * 0.5) for i in range(100)) + "\n")
    rec = read_csv_recording(p, 4)
    ch = rec.channels[0]
    assert len(ch.samples) == 100
    assert ch.duration_s == 25.0
    assert ch.samples[3] == 1.5


def test_csv_two_columns_with_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("time_s,value\n0,1.5\n0.25,2.5\n0.5,-1\n")
    rec = read_csv_recording(p, 4)
    np.testing.assert_array_equal(rec.channels[0].samples, [1.5, 2.5, -1.0])


def test_csv_empty(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("")
    with pytest.raises(ParseError):
        read_csv_recording(p, 4)


def test_csv_bad_row_line_number(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1.0,abc\n")
    with pytest.raises(ParseError) as info:
        read_csv_recording(p, 4)
    assert info.value.line == 1  # 1-based file lines


def test_csv_bad_row_after_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t,v\n0,1\n0.25,oops\n")
    with pytest.raises(ParseError) as info:
        read_csv_recording(p, 4)
    assert info.value.line == 3


# ---------------------------------------------------------------- annotations

def test_annotation_round_trip(tmp_path):
    ann = AnnotationSet(["Wake", "NREM", "Unknown", "REM"],
                        [Event("hypopnea", 12.5, 20.0)], 7, "F")
    write_annotations(tmp_path / "s.csv", tmp_path / "e.csv", ann)
    back = read_annotations(tmp_path / "s.csv", tmp_path / "e.csv", (7, "F"))
    assert back == ann


def test_unknown_stage_label_rejected(tmp_path):
    (tmp_path / "s.csv").write_text("epoch_index,stage\n0,N2\n")
    with pytest.raises(InputError):
        read_annotations(tmp_path / "s.csv")


def test_bad_event_interval():
    with pytest.raises(InputError):
        AnnotationSet(["Wake"], [Event("hypopnea", 5.0, 5.0)])


def test_demographics(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("subject_id,age_years,sex\nA,2,M\nB,11,F\n")
    assert read_demographics(p) == {"A": (2, "M"), "B": (11, "F")}


# ---------------------------------------------------------------- SQI

RATE = 256.0


def _epoch(f_hz=0.3, amp=1.0, rate=RATE):
    t = np.arange(int(30 * rate)) / rate
    return amp * np.sin(2 * np.pi * f_hz * t)


@pytest.mark.parametrize("amp", [1e-4, 1.0, 250.0])
def test_sqi_pure_tone(amp):
    x = _epoch(amp=amp)
    assert sqi(x, RATE) >= 0.8
    assert sqi(x, RATE) == pytest.approx(spectral_sqi(x, RATE), abs=1e-9)


def test_sqi_white_noise():
    x = np.random.default_rng(0).normal(size=int(30 * RATE))
    assert sqi(x, RATE) < 0.25
    assert sqi(x, RATE) == pytest.approx(spectral_sqi(x, RATE), abs=1e-9)


def test_sqi_zeros_and_constant():
    assert sqi(np.zeros(int(30 * RATE)), RATE) == 0.0
    assert sqi(np.full(int(30 * RATE), 3.0), RATE) == 0.0


def test_sqi_scale_invariance_many():
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.normal(size=240) + np.sin(np.arange(240) * rng.uniform(0.05, 0.5))
        c = rng.uniform(0.01, 100)
        assert abs(sqi(c * x, 8.0) - sqi(x, 8.0)) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_sqi_matches_fft_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=240) * rng.uniform(0, 1) + _epoch(rng.uniform(0.1, 1.0), 1.0, 8.0)
    q = sqi(x, 8.0)
    assert 0.0 <= q <= 1.0
    assert q == pytest.approx(spectral_sqi(x, 8.0), abs=1e-9)


# ---------------------------------------------------------------- windows

def _recording(n_epochs, rate=4.0, f_hz=0.3):
    t = np.arange(int(n_epochs * 30 * rate)) / rate
    return Recording([Channel("Airflow", rate, np.sin(2 * np.pi * f_hz * t))], "S1")


def test_desaturation_excludes_overlapping_windows():
    rec = _recording(20)
    ann = AnnotationSet(["NREM"] * 20, [Event("desaturation", 95.0, 100.0)])
    windows = build_windows(rec, ann)
    got = [w.target_epoch_index for w in windows]
    assert got == list(range(9, 20))
    decisions, _ = screen_epochs(rec, ann)
    assert [d.epoch_index for d in decisions if d.reason == "events"] == [5, 6, 7, 8]


def test_half_open_event_boundary():
    rec = _recording(12)
    # ends exactly where the window of epoch 9 starts ([120, 300))
    ann = AnnotationSet(["REM"] * 12, [Event("hypopnea", 100.0, 120.0)])
    got = [w.target_epoch_index for w in build_windows(rec, ann)]
    assert got == [9, 10, 11]


def test_non_excluding_event_kind_ignored():
    rec = _recording(8)
    ann = AnnotationSet(["Wake"] * 8, [Event("arousal", 10.0, 20.0)])
    assert [w.target_epoch_index for w in build_windows(rec, ann)] == [5, 6, 7]


def test_history_and_unknown():
    rec = _recording(10)
    assert build_windows(rec, AnnotationSet(["Unknown"] * 10)) == []
    windows = build_windows(rec, AnnotationSet(["Wake"] * 10))
    assert min(w.target_epoch_index for w in windows) == 5


def test_window_contents():
    rec = _recording(8)
    w = build_windows(rec, AnnotationSet(["Wake", "Wake", "Wake", "Wake", "Wake", "Wake",
                                          "REM", "NREM"]))
    assert [x.label for x in w] == ["Wake", "REM", "NREM"]
    assert len(w[0].airflow) == 6 * 30 * 4
    np.testing.assert_array_equal(w[1].airflow, rec.channels[0].samples[30 * 4:7 * 30 * 4])


def test_sqi_gate_and_threshold():
    rec = _recording(8)
    rng = np.random.default_rng(0)
    rec.channels[0].samples[6 * 120:7 * 120] = rng.normal(size=120)
    ann = AnnotationSet(["NREM"] * 8)
    assert [w.target_epoch_index for w in build_windows(rec, ann)] == [5, 7]

    class Loose:
        sqi_threshold = 0.0
    assert [w.target_epoch_index for w in build_windows(rec, ann, Loose())] == [5, 6, 7]


def test_truncated_recording_epochs():
    rec = _recording(7)
    decisions, windows = screen_epochs(rec, AnnotationSet(["NREM"] * 9))
    assert [w.target_epoch_index for w in windows] == [5, 6]
    assert [d.reason for d in decisions][-2:] == ["truncated", "truncated"]


def test_build_windows_missing_channel():
    rec = Recording([Channel("Thor", 4.0, np.zeros(4 * 30 * 6))], "S")
    with pytest.raises(ChannelMissingError):
        build_windows(rec, AnnotationSet(["Wake"] * 6))


@given(st.lists(st.sampled_from(["Wake", "NREM", "REM", "Unknown"]), min_size=1, max_size=16),
       st.lists(st.tuples(st.floats(0, 480), st.floats(0.5, 60)), max_size=4))
def test_windows_disjoint_from_events(stages, evs):
    rec = _recording(16, rate=2.0)
    events = [Event("obstructive_apnea", s, s + d) for s, d in evs]
    ann = AnnotationSet(stages, events)
    windows = build_windows(rec, ann)
    assert len(windows) <= max(0, len(stages) - 5)
    for w in windows:
        lo, hi = 30.0 * (w.target_epoch_index - 5), 30.0 * (w.target_epoch_index + 1)
        for e in events:
            assert not (lo < e.end_s and e.start_s < hi)
    again = build_windows(rec, ann)
    assert [(w.target_epoch_index, w.airflow.tobytes()) for w in again] == \
        [(w.target_epoch_index, w.airflow.tobytes()) for w in windows]
    decisions, _ = screen_epochs(rec, ann)
    assert len(decisions) == len(stages)
