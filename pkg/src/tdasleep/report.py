"""Approximation residuals of HEPC, SP-FAPC and AP-FAPC over a diagram corpus."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .curves import (DEFAULT_GRID, FitConstants, ap_domain, entropy_curve, fapc_coefficients,
                     hepc_coefficients, reconstruct_fapc, reconstruct_hepc, residual, sp_domain)
from .diagram import DIAGRAM_KEYS, PersistenceDiagram

METHODS = ("HEPC", "SP_FAPC", "AP_FAPC")
REPORT_COLUMNS = ("source", "n_diagrams", "hepc", "sp_fapc", "ap_fapc", "min_d_min",
                  "median_d_min", "median_d_max", "max_d_max")


def diagram_residuals(diagram: PersistenceDiagram, constants: FitConstants, n_coeffs: int = 15,
                      grid_points: int = DEFAULT_GRID) -> dict:
    """Residual of each method for one diagram.

    AP-FAPC and SP-FAPC are scored on a uniform grid over their own domains.
    HEPC is scored on the curve's support after pre-scaling, against the
    scaled curve. A diagram with an empty curve scores 0 everywhere.
    """
    curve = entropy_curve(diagram)
    dom = ap_domain(diagram)
    if dom is None:
        return dict.fromkeys(METHODS, 0.0)
    out = {}
    ap = fapc_coefficients(diagram, n_coeffs, dom, "AP_FAPC")
    out["AP_FAPC"] = residual(curve, *reconstruct_fapc(ap, grid_points))
    sp = fapc_coefficients(diagram, n_coeffs, sp_domain(diagram.key, constants), "SP_FAPC")
    out["SP_FAPC"] = residual(curve, *reconstruct_fapc(sp, grid_points))
    scale = constants.hepc_scale[diagram.key]
    he = hepc_coefficients(diagram, n_coeffs, scale)
    scaled_curve = entropy_curve(diagram.scaled(scale))
    x, approx = reconstruct_hepc(he, (dom[0] * scale, dom[1] * scale), grid_points)
    out["HEPC"] = residual(scaled_curve, x, approx)
    return out


@dataclass
class ResidualRow:
    source: str
    n_diagrams: int
    mean: dict
    min_d_min: float
    median_d_min: float
    median_d_max: float
    max_d_max: float

    def as_list(self):
        return [self.source, self.n_diagrams, self.mean["HEPC"], self.mean["SP_FAPC"],
                self.mean["AP_FAPC"], self.min_d_min, self.median_d_min, self.median_d_max,
                self.max_d_max]


def residual_table(diagrams_by_key: dict, constants: FitConstants, n_coeffs: int = 15,
                   grid_points: int = DEFAULT_GRID) -> list:
    """One :class:`ResidualRow` per diagram source, canonical sources first."""
    keys = [k for k in DIAGRAM_KEYS if k in diagrams_by_key]
    keys += sorted(k for k in diagrams_by_key if k not in DIAGRAM_KEYS)
    rows = []
    for key in keys:
        dgms = diagrams_by_key[key]
        per = [diagram_residuals(d, constants, n_coeffs, grid_points) for d in dgms]
        mean = {m: float(np.mean([p[m] for p in per])) if per else float("nan") for m in METHODS}
        doms = [dom for dom in map(ap_domain, dgms) if dom is not None]
        lo = np.array([d[0] for d in doms]) if doms else np.array([np.nan])
        hi = np.array([d[1] for d in doms]) if doms else np.array([np.nan])
        rows.append(ResidualRow(key, len(dgms), mean, float(lo.min()), float(np.median(lo)),
                                float(np.median(hi)), float(hi.max())))
    return rows


def format_table(rows, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([v if isinstance(v, (str, int)) else repr(float(v)) for v in r.as_list()])
        return buf.getvalue()
    head = f"{'source':<22}{'n':>6}{'HEPC':>12}{'SP-FAPC':>12}{'AP-FAPC':>12}" \
           f"{'min dmin':>12}{'med dmin':>12}{'med dmax':>12}{'max dmax':>12}"
    lines = [head]
    for r in rows:
        vals = r.as_list()
        lines.append(f"{vals[0]:<22}{vals[1]:>6}" + "".join(f"{v:>12.4g}" for v in vals[2:]))
    return "\n".join(lines) + "\n"
