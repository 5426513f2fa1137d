"""Persistence diagram container and its CSV serialization."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError

SOURCES = ("rips_airflow", "sublevel_airflow", "sublevel_irr")

# The four diagrams used as feature sources, in canonical order.
DIAGRAM_KEYS = (
    "rips_airflow_h0",
    "rips_airflow_h1",
    "sublevel_airflow_h0",
    "sublevel_irr_h0",
)

CSV_COLUMNS = ("source", "dim", "birth", "death", "multiplicity")


@dataclass
class PersistenceDiagram:
    """Multiset of (birth, death) bars for one homology dimension.

    ``bars`` is a float array of shape (k, 2); essential classes carry
    ``death = inf``. ``multiplicity`` holds a positive count per row.
    """

    bars: np.ndarray
    dim: int = 0
    source: str = "rips_airflow"
    multiplicity: np.ndarray = field(default=None)

    def __post_init__(self):
        bars = np.asarray(self.bars, dtype=float).reshape(-1, 2)
        if np.any(bars[:, 0] > bars[:, 1]):
            raise ValueError("bar with birth > death")
        self.bars = bars
        if self.multiplicity is None:
            self.multiplicity = np.ones(len(bars), dtype=np.int64)
        else:
            self.multiplicity = np.asarray(self.multiplicity, dtype=np.int64)
            if self.multiplicity.shape != (len(bars),) or np.any(self.multiplicity < 1):
                raise ValueError("multiplicity must be a positive count per bar")

    @property
    def key(self) -> str:
        return f"{self.source}_h{self.dim}"

    @property
    def births(self) -> np.ndarray:
        return self.bars[:, 0]

    @property
    def deaths(self) -> np.ndarray:
        return self.bars[:, 1]

    def __len__(self):
        return int(self.multiplicity.sum())

    def finite(self) -> "PersistenceDiagram":
        """Diagram restricted to bars with a finite death."""
        keep = np.isfinite(self.bars[:, 1])
        return PersistenceDiagram(self.bars[keep], self.dim, self.source, self.multiplicity[keep])

    def positive(self) -> "PersistenceDiagram":
        """Finite bars of strictly positive length (the ones a curve can see)."""
        b, d = self.bars[:, 0], self.bars[:, 1]
        keep = np.isfinite(d) & (d > b)
        return PersistenceDiagram(self.bars[keep], self.dim, self.source, self.multiplicity[keep])

    def expanded(self) -> np.ndarray:
        """Bars with multiplicities unrolled into repeated rows."""
        return np.repeat(self.bars, self.multiplicity, axis=0)

    def scaled(self, c: float) -> "PersistenceDiagram":
        return PersistenceDiagram(self.bars * c, self.dim, self.source, self.multiplicity.copy())

    @property
    def d_max(self) -> float:
        """Largest finite death, or nan when there is none."""
        d = self.bars[:, 1]
        d = d[np.isfinite(d)]
        return float(d.max()) if d.size else math.nan

    def sorted(self) -> "PersistenceDiagram":
        """Canonical row order (birth, death); identical multisets compare equal."""
        bars = self.expanded()
        if len(bars):
            order = np.lexsort((bars[:, 1], bars[:, 0]))
            bars = bars[order]
        uniq, counts = (np.unique(bars, axis=0, return_counts=True) if len(bars)
                        else (bars, np.zeros(0, dtype=np.int64)))
        return PersistenceDiagram(uniq, self.dim, self.source, counts)

    def same_bars(self, other: "PersistenceDiagram") -> bool:
        a, b = self.sorted(), other.sorted()
        return (np.array_equal(a.bars, b.bars) and np.array_equal(a.multiplicity, b.multiplicity))


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def diagrams_to_csv(diagrams, path=None) -> str:
    """Serialize diagrams as rows of (source, dim, birth, death, multiplicity).

    Identical bars are merged into one row. Floats are written with ``repr`` so
    reading the file back gives bit-identical values.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for dgm in diagrams:
        s = dgm.sorted()
        for (b, d), m in zip(s.bars, s.multiplicity):
            w.writerow([dgm.source, dgm.dim, _fmt(b), _fmt(d), int(m)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def diagrams_from_csv(path_or_text) -> list[PersistenceDiagram]:
    """Inverse of :func:`diagrams_to_csv`.

    Accepts a path or the CSV text itself. Diagrams are returned in order of
    first appearance of their (source, dim) pair; a header-only file yields [].
    """
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    else:
        text = path_or_text
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ParseError("diagram CSV header must be " + ",".join(CSV_COLUMNS), line=0)
    groups: dict[tuple[str, int], list] = {}
    for lineno, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        try:
            source, dim, b, d, m = row
            key = (source, int(dim))
            groups.setdefault(key, []).append((float(b), float(d), int(m)))
        except ValueError as exc:
            raise ParseError(f"bad diagram row at line {lineno}: {row!r}", line=lineno) from exc
    out = []
    for (source, dim), items in groups.items():
        arr = np.array([(b, d) for b, d, _ in items], dtype=float).reshape(-1, 2)
        mult = np.array([m for _, _, m in items], dtype=np.int64)
        out.append(PersistenceDiagram(arr, dim, source, mult))
    return out
