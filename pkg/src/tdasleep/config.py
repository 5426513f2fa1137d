"""Run configuration and its key = value file format.

The file is INI-style with a single ``[pipeline]`` section::

    [pipeline]
    sqi_threshold = 0.25
    feature_blocks = Baseline+AP_FAPC+HEPC

Every field of :class:`PipelineConfig` may appear; unknown keys are an error.
Floats are written with ``repr`` so a config survives a write/read cycle
unchanged.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields

from .errors import ConfigError
from .features import parse_blocks

SECTION = "pipeline"


@dataclass
class PipelineConfig:
    sqi_threshold: float = 0.25
    airflow_downsample_hz: float = 8.0
    rips_max_points: int = 512
    embed_dim: int = 3
    n_coeffs: int = 15
    feature_blocks: str = "Baseline+AP_FAPC+HEPC"
    folds: int = 5
    seed: int = 0
    irr_knots: str = "end"
    airflow_channel: str = "Airflow"
    csv_rate_hz: float = 256.0
    constants_path: str = ""
    constants_sample: int = 10000
    data_dir: str = ""
    output_dir: str = ""
    cache_dir: str = ""
    diagram_dir: str = ""
    workers: int = 1
    output_format: str = "csv"

    def __post_init__(self):
        self.validate()

    def validate(self):
        parse_blocks(self.feature_blocks)
        if not 0 <= self.sqi_threshold <= 1:
            raise ConfigError("sqi_threshold must lie in [0, 1]")
        if self.airflow_downsample_hz <= 0 or self.rips_max_points < 1 or self.n_coeffs < 1:
            raise ConfigError("downsample rate, Rips point budget and n_coeffs must be positive")
        if self.embed_dim < 2 or self.folds < 2 or self.workers < 1:
            raise ConfigError("embed_dim >= 2, folds >= 2 and workers >= 1 required")
        if self.irr_knots not in ("end", "start"):
            raise ConfigError("irr_knots must be 'end' or 'start'")
        if self.output_format not in ("csv", "ndjson"):
            raise ConfigError("output_format must be 'csv' or 'ndjson'")

    # fields that change computed features (paths and worker count do not)
    COMPUTE_FIELDS = ("sqi_threshold", "airflow_downsample_hz", "rips_max_points", "embed_dim",
                      "n_coeffs", "feature_blocks", "folds", "seed", "irr_knots",
                      "airflow_channel", "csv_rate_hz")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        payload = {k: getattr(self, k) for k in self.COMPUTE_FIELDS}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    def write(self, path):
        cp = configparser.ConfigParser()
        cp[SECTION] = {f.name: _render(getattr(self, f.name)) for f in fields(self)}
        with open(path, "w", encoding="utf-8") as fh:
            cp.write(fh)

    @classmethod
    def read(cls, path, **overrides) -> "PipelineConfig":
        cp = configparser.ConfigParser()
        try:
            found = cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not found:
            raise ConfigError(f"cannot read config file {path}")
        if SECTION not in cp:
            raise ConfigError(f"{path}: missing [{SECTION}] section")
        values = dict(cp[SECTION])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _parse(raw, types[key], key)
        return cls(**kwargs)


def _render(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _parse(raw, typ, key):
    if not isinstance(raw, str):
        return raw
    try:
        if typ in ("float", float):
            return float(raw)
        if typ in ("int", int):
            return int(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw
