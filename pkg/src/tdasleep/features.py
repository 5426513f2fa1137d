"""Feature vectors, normalization, class weights and subject folds."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .curves import (FitConstants, ap_domain, fapc_coefficients,
                     hepc_coefficients, sp_domain)
from .diagram import DIAGRAM_KEYS
from .errors import ConfigError, EmptyBreathsError, MissingClassError
from .preprocess import BreathSequence

BASELINE_NAMES = (
    "amplitude_median", "amplitude_iqr",
    "width_median", "width_iqr",
    "peak_median", "peak_iqr",
    "trough_median", "trough_iqr",
    "mai", "mae", "mai_mae_ratio",
)
BLOCKS = ("Baseline", "HEPC", "AP_FAPC", "SP_FAPC")
RATIO_CAP = 1e6
LABELS = ("Wake", "NREM", "REM")


def _iqr(x) -> float:
    q75, q25 = np.percentile(x, [75, 25])
    return float(q75 - q25)


def classical_features(breaths: BreathSequence, ratio_cap: float = RATIO_CAP):
    """The 11 baseline features of one window, plus degeneracy flags.

    Order: median/IQR of cycle amplitude, width, peak value and trough value,
    then MAI, MAE and MAI/MAE. When MAE is zero the ratio is replaced by
    ``ratio_cap`` and the ``ratio_capped`` flag is set.
    """
    if len(breaths) < 2:
        raise EmptyBreathsError("classical features need at least 2 breathing cycles")
    out = []
    for series in (breaths.amplitude, breaths.width_s, breaths.peak_value,
                   breaths.trough_value):
        out += [float(np.median(series)), _iqr(series)]
    mai = float(np.median(breaths.inhale_area))
    mae = float(np.median(breaths.exhale_area))
    capped = mae == 0
    out += [mai, mae, ratio_cap if capped else mai / mae]
    return np.asarray(out), {"ratio_capped": capped}


@dataclass
class FeatureVector:
    subject_id: str
    target_epoch_index: int
    label: str
    blocks: list = field(default_factory=list)  # (column prefix, values)
    flags: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([np.asarray(v, dtype=float) for _, v in self.blocks])

    @property
    def columns(self) -> list:
        return [f"{name}.{i}" for name, v in self.blocks for i in range(len(v))]


def parse_blocks(spec) -> list:
    """``"Baseline+AP_FAPC+HEPC"`` (or a list) -> validated block names."""
    names = spec.split("+") if isinstance(spec, str) else list(spec)
    names = [n.strip() for n in names if n.strip()]
    for n in names:
        if n not in BLOCKS:
            raise ConfigError(f"unknown feature block {n!r}; choose from {BLOCKS}")
    if len(set(names)) != len(names):
        raise ConfigError(f"repeated feature block in {spec!r}")
    return names


def block_width(name: str, n_coeffs: int = 15) -> int:
    return {"Baseline": len(BASELINE_NAMES), "HEPC": n_coeffs}.get(name, 2 * n_coeffs)


def feature_count(blocks, n_coeffs: int = 15, n_sources: int = len(DIAGRAM_KEYS)) -> int:
    total = 0
    for b in parse_blocks(blocks):
        total += block_width(b) if b == "Baseline" else n_sources * block_width(b, n_coeffs)
    return total


def coefficient_block(kind: str, diagram, constants: FitConstants, n_coeffs: int = 15):
    """Coefficients of one kind for one diagram; None diagram -> None."""
    if diagram is None:
        return None
    if kind == "HEPC":
        scale = constants.hepc_scale.get(diagram.key)
        if scale is None:
            raise ConfigError(f"no HEPC scale configured for {diagram.key!r}")
        return hepc_coefficients(diagram, n_coeffs, scale)
    if kind == "AP_FAPC":
        return fapc_coefficients(diagram, n_coeffs, ap_domain(diagram), "AP_FAPC")
    if kind == "SP_FAPC":
        return fapc_coefficients(diagram, n_coeffs, sp_domain(diagram.key, constants), "SP_FAPC")
    raise ConfigError(f"unknown coefficient block {kind!r}")


def assemble(window, diagrams: dict, constants: FitConstants, blocks="Baseline+AP_FAPC+HEPC",
             n_coeffs: int = 15, breaths: BreathSequence | None = None,
             baseline=None) -> FeatureVector:
    """Concatenate the requested blocks for one window.

    ``diagrams`` maps diagram keys (``DIAGRAM_KEYS``) to diagrams. A missing
    diagram, or one whose curve is empty, contributes a zero block and sets the
    flag ``empty.<key>``. Baseline values come from ``baseline`` if given,
    otherwise from ``breaths``.
    """
    names = parse_blocks(blocks)
    fv = FeatureVector(window.subject_id, window.target_epoch_index, window.label)
    for key in DIAGRAM_KEYS:
        dgm = diagrams.get(key)
        fv.flags[f"empty.{key}"] = dgm is None or ap_domain(dgm) is None
    for name in names:
        if name == "Baseline":
            if baseline is None:
                if breaths is None:
                    raise ConfigError("Baseline block needs breaths or precomputed values")
                baseline = classical_features(breaths)
            values, bflags = baseline
            fv.blocks.append(("baseline", np.asarray(values, dtype=float)))
            fv.flags.update(bflags)
            continue
        for key in DIAGRAM_KEYS:
            cv = coefficient_block(name, diagrams.get(key), constants, n_coeffs)
            width = block_width(name, n_coeffs)
            vals = np.zeros(width) if cv is None else cv.coeffs
            fv.blocks.append((f"{name.lower()}.{key}", vals))
    return fv


@dataclass
class ZNorm:
    mean: np.ndarray
    std: np.ndarray
    scaled: np.ndarray  # False where the column is only centered


def znorm_fit(train, eps: float = 1e-12) -> ZNorm:
    """Per-column mean and population std of the training matrix."""
    x = np.asarray(train, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need a 2-D matrix with at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return ZNorm(mean, std, std >= eps)


def znorm_apply(x, stats: ZNorm) -> np.ndarray:
    """Standardize with training statistics; near-constant columns are only centered."""
    x = np.asarray(x, dtype=float)
    denom = np.where(stats.scaled, stats.std, 1.0)
    return (x - stats.mean) / denom


def class_weights(labels, classes=LABELS) -> dict:
    """Inverse-frequency weights ``N / (K * N_c)``."""
    counts = Counter(labels)
    missing = [c for c in classes if counts.get(c, 0) == 0]
    if missing:
        raise MissingClassError(f"classes absent from training labels: {missing}")
    total = sum(counts[c] for c in classes)
    return {c: total / (len(classes) * counts[c]) for c in classes}


def class_weights_from_counts(counts: dict) -> dict:
    total = sum(counts.values())
    if any(v <= 0 for v in counts.values()):
        raise MissingClassError("every class needs a positive count")
    return {c: total / (len(counts) * n) for c, n in counts.items()}


def stratified_folds(subjects, k: int = 5, seed=0) -> dict:
    """Assign subjects to ``k`` folds, balancing every (age, sex) stratum.

    ``subjects`` is an iterable of ``(subject_id, age_years, sex)``. Each
    stratum is shuffled with a generator derived from ``seed`` and dealt
    round-robin; the dealing position carries over between strata (sorted by
    key) so total fold sizes stay level too.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    strata = defaultdict(list)
    for sid, age, sex in subjects:
        strata[(int(age), str(sex))].append(str(sid))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    folds, cursor = {}, 0
    for key in sorted(strata):
        ids = sorted(strata[key])
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate subject id in stratum {key}")
        for sid in [ids[i] for i in rng.permutation(len(ids))]:
            if sid in folds:
                raise ValueError(f"subject {sid!r} listed in two strata")
            folds[sid] = cursor % k
            cursor += 1
    return folds


def counts_per_fold(folds: dict, k: int) -> list:
    c = Counter(folds.values())
    return [c.get(i, 0) for i in range(k)]


__all__ = [
    "BASELINE_NAMES", "BLOCKS", "FeatureVector", "classical_features", "assemble",
    "parse_blocks", "feature_count", "znorm_fit", "znorm_apply", "ZNorm", "class_weights",
    "class_weights_from_counts", "stratified_folds", "coefficient_block", "counts_per_fold",
]
