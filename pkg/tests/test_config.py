import dataclasses

import pytest

from tdasleep.config import PipelineConfig
from tdasleep.errors import ConfigError


def test_defaults():
    c = PipelineConfig()
    assert c.sqi_threshold == 0.25
    assert c.airflow_downsample_hz == 8.0
    assert c.rips_max_points == 512
    assert c.n_coeffs == 15
    assert c.feature_blocks == "Baseline+AP_FAPC+HEPC"
    assert c.folds == 5
    assert c.embed_dim == 3
    assert c.irr_knots == "end"


def test_round_trip(tmp_path):
    c = PipelineConfig(sqi_threshold=0.1 + 0.2, seed=77, feature_blocks="Baseline+HEPC",
                       data_dir="/some/where", workers=3, csv_rate_hz=100.0 / 3)
    c.write(tmp_path / "run.ini")
    back = PipelineConfig.read(tmp_path / "run.ini")
    assert back == c
    assert dataclasses.asdict(back) == dataclasses.asdict(c)


def test_overrides_win(tmp_path):
    PipelineConfig(seed=1, n_coeffs=20).write(tmp_path / "run.ini")
    c = PipelineConfig.read(tmp_path / "run.ini", seed=9, n_coeffs=None)
    assert c.seed == 9 and c.n_coeffs == 20


def test_partial_file(tmp_path):
    (tmp_path / "run.ini").write_text("[pipeline]\nrips_max_points = 64\n")
    c = PipelineConfig.read(tmp_path / "run.ini")
    assert c.rips_max_points == 64 and c.sqi_threshold == 0.25


@pytest.mark.parametrize("text", [
    "[pipeline]\nbogus = 1\n",
    "[pipeline]\nseed = one\n",
    "[other]\nseed = 1\n",
    "no section header\n",
    "[pipeline]\nfeature_blocks = Baseline+Wavelet\n",
    "[pipeline]\nsqi_threshold = 1.5\n",
])
def test_bad_files(tmp_path, text):
    (tmp_path / "run.ini").write_text(text)
    with pytest.raises(ConfigError):
        PipelineConfig.read(tmp_path / "run.ini")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.read(tmp_path / "nope.ini")


@pytest.mark.parametrize("kwargs", [
    {"airflow_downsample_hz": 0}, {"rips_max_points": 0}, {"n_coeffs": 0}, {"embed_dim": 1},
    {"folds": 1}, {"workers": 0}, {"irr_knots": "middle"}, {"output_format": "xlsx"},
])
def test_validation(kwargs):
    with pytest.raises(ConfigError):
        PipelineConfig(**kwargs)


def test_hash_ignores_paths_and_workers():
    a = PipelineConfig(data_dir="a", output_dir="b", workers=1)
    b = PipelineConfig(data_dir="c", output_dir="d", workers=8)
    assert a.hash() == b.hash()
    assert a.hash() != PipelineConfig(seed=1).hash()
