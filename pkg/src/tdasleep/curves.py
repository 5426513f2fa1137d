"""Lifespan-entropy persistence curves and their series approximations.

Two families of coefficients are produced for a diagram:

* HEPC: projections of the (pre-scaled) curve onto Hermite functions, built
  with a closed-form recursion over the bars.
* FAPC: complex Fourier coefficients on a finite domain ``[d_min, d_max]``,
  also in closed form. The domain is either the curve's own support
  (``AP_FAPC``) or a per-source preset (``SP_FAPC``).

Fourier sign convention: coefficients use ``exp(+2*pi*i*n*x/A)`` inside the
integral, with absolute ``x`` (not ``x - d_min``). With this convention
``Re(beta_n)`` and ``Im(beta_n)`` are exactly the cosine and sine
coefficients of the real Fourier series, which is what the reconstruction
uses.
"""
from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .diagram import DIAGRAM_KEYS, PersistenceDiagram
from .errors import ConfigError, DomainError, OverflowGuardError

log = logging.getLogger(__name__)

KINDS = ("HEPC", "AP_FAPC", "SP_FAPC")
DEFAULT_GRID = 1000
_PI_QUARTER = math.pi ** 0.25
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PersistenceCurve:
    """Piecewise-constant curve, zero outside ``[breakpoints[0], breakpoints[-1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.breakpoints) < 2

    @property
    def support(self):
        if self.is_empty:
            return None
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_empty:
            return np.zeros_like(x)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros_like(x)
        out[inside] = self.values[idx[inside]]
        return out

    def integral(self) -> float:
        if self.is_empty:
            return 0.0
        return float(np.sum(self.values * np.diff(self.breakpoints)))


ZERO_CURVE = PersistenceCurve(np.zeros(0), np.zeros(0))


def _weighted_bars(diagram: PersistenceDiagram):
    """Finite positive-length bars with their multiplicities as float weights."""
    pos = diagram.positive()
    return pos.births.copy(), pos.deaths.copy(), pos.multiplicity.astype(float)


def lifespan_entropy(births, deaths, weights=None) -> np.ndarray:
    """Per-bar weight ``-(l/L) log(l/L)`` with ``L`` the total finite lifespan.

    Bars are expected finite. Zero-length bars get weight 0 and add nothing
    to ``L``. ``weights`` are multiplicities counted into ``L``.
    """
    b = np.asarray(births, dtype=float)
    d = np.asarray(deaths, dtype=float)
    w = np.ones_like(b) if weights is None else np.asarray(weights, dtype=float)
    life = d - b
    total = float(np.sum(w * life))
    out = np.zeros_like(life)
    if total <= 0:
        return out
    p = life / total
    nz = p > 0
    out[nz] = -p[nz] * np.log(p[nz])
    return out


def entropy_curve(diagram: PersistenceDiagram) -> PersistenceCurve:
    """Lifespan-entropy curve of a diagram (infinite bars dropped).

    Returns :data:`ZERO_CURVE` when there is no finite bar of positive length.
    """
    b, d, w = _weighted_bars(diagram)
    if b.size == 0:
        return ZERO_CURVE
    psi = lifespan_entropy(b, d, w) * w
    bp = np.unique(np.concatenate([b, d]))
    start = np.searchsorted(bp, b)
    stop = np.searchsorted(bp, d)
    delta = np.zeros(len(bp))
    cover = np.zeros(len(bp), dtype=np.int64)
    np.add.at(delta, start, psi)
    np.add.at(delta, stop, -psi)
    np.add.at(cover, start, 1)
    np.add.at(cover, stop, -1)
    values = np.cumsum(delta)[:-1]
    # cumsum round-off must not leave residue where no bar is alive
    values[np.cumsum(cover)[:-1] == 0] = 0.0
    return PersistenceCurve(bp, np.maximum(values, 0.0))


@dataclass
class CoefficientVector:
    """Fixed-length approximation of one curve.

    ``coeffs`` holds ``n`` reals for HEPC, or ``2n`` reals for FAPC laid out as
    ``[Re_0 .. Re_{n-1}, Im_0 .. Im_{n-1}]``.
    """

    kind: str
    coeffs: np.ndarray
    domain: tuple | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown coefficient kind {self.kind!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)

    @property
    def n_coeffs(self) -> int:
        return len(self.coeffs) if self.kind == "HEPC" else len(self.coeffs) // 2

    @property
    def complex(self) -> np.ndarray:
        if self.kind == "HEPC":
            return self.coeffs.astype(complex)
        n = self.n_coeffs
        return self.coeffs[:n] + 1j * self.coeffs[n:]


def hermite_functions(x, n: int) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0 .. h_{n-1}`` evaluated at ``x``.

    ``h_k(x) = (2^k k! sqrt(pi))^{-1/2} H_k(x) exp(-x^2/2)``, computed with the
    normalized three-term recurrence so large ``k`` does not overflow.
    Returns an array of shape ``(n,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((max(n, 0),) + x.shape)
    if n == 0:
        return out
    out[0] = np.exp(-0.5 * x * x) / _PI_QUARTER
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def _normal_cdf_diff(b, d):
    # Phi(d) - Phi(b) without cancellation in the upper tail
    upper = b > 0
    return np.where(upper, ndtr(-b) - ndtr(-d), ndtr(d) - ndtr(b))


def hepc_coefficients(diagram: PersistenceDiagram, n_coeffs: int = 15,
                      scale: float = 1.0) -> CoefficientVector:
    """Hermite coefficients of the entropy curve of ``scale * diagram``.

    alpha_0 and alpha_1 have closed forms in the normal CDF/density; higher
    orders follow

        alpha_{n+1} = sqrt(2/(n+1)) * sum psi * (h_n(b) - h_n(d))
                      + n / sqrt(n(n+1)) * alpha_{n-1}

    where ``h_n`` is the orthonormal Hermite function (the only normalization
    under which this recursion agrees with the alpha_0/alpha_1 closed forms).
    """
    if n_coeffs < 1:
        raise ValueError("n_coeffs must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    alpha = np.zeros(n_coeffs)
    b, d, w = _weighted_bars(diagram)
    if b.size:
        b, d = b * scale, d * scale
        psi = lifespan_entropy(b, d, w) * w
        alpha[0] = np.sum(math.sqrt(2.0) * _PI_QUARTER * psi * _normal_cdf_diff(b, d))
        if n_coeffs > 1:
            phi_b = np.exp(-0.5 * b * b) * _INV_SQRT_2PI
            phi_d = np.exp(-0.5 * d * d) * _INV_SQRT_2PI
            alpha[1] = np.sum(2.0 * _PI_QUARTER * psi * (phi_b - phi_d))
        if n_coeffs > 2:
            hb = hermite_functions(b, n_coeffs - 1)
            hd = hermite_functions(d, n_coeffs - 1)
            for n in range(1, n_coeffs - 1):
                alpha[n + 1] = (math.sqrt(2.0) / math.sqrt(n + 1) * np.sum(psi * (hb[n] - hd[n]))
                                + n / math.sqrt(n * (n + 1)) * alpha[n - 1])
    return CoefficientVector("HEPC", alpha, None, float(scale))


def ap_domain(diagram: PersistenceDiagram):
    """Support of the curve: (min birth, max death) over finite positive bars.

    Returns None when no such bar exists (the curve is empty).
    """
    b, d, _ = _weighted_bars(diagram)
    if b.size == 0:
        return None
    return float(b.min()), float(d.max())


def _fourier_phase(x, n, width):
    # exp(2*pi*i*n*x/A) is A-periodic in x; reducing x mod A first is exact
    # (fmod) and keeps the phase small when |x| >> A.
    r = np.fmod(x, width)
    return np.exp(2j * np.pi * np.multiply.outer(n, r) / width)


def fapc_coefficients(diagram: PersistenceDiagram, n_coeffs: int = 15, domain=None,
                      kind: str = "AP_FAPC") -> CoefficientVector:
    """Fourier coefficients of the entropy curve on ``domain = (d_min, d_max)``.

    beta_0 = (2/A) sum psi (d - b)
    beta_n = (2/A) sum psi * (iA / (2 pi n)) * (e^{2 pi i b n/A} - e^{2 pi i d n/A})

    with ``A = d_max - d_min``. Bars are clipped to the domain; ``psi`` is
    always the weight of the unclipped bar. ``domain=None`` means the AP
    domain of the diagram; an empty diagram gives all zeros.
    """
    if kind not in ("AP_FAPC", "SP_FAPC"):
        raise ConfigError(f"not a Fourier kind: {kind!r}")
    if n_coeffs < 1:
        raise ValueError("n_coeffs must be >= 1")
    if domain is None:
        domain = ap_domain(diagram)
    beta = np.zeros(n_coeffs, dtype=complex)
    if domain is None:
        return CoefficientVector(kind, np.zeros(2 * n_coeffs), None)
    lo, hi = float(domain[0]), float(domain[1])
    width = hi - lo
    if not width > 0:
        raise DomainError(f"empty approximation domain ({lo}, {hi})")
    b, d, w = _weighted_bars(diagram)
    if b.size:
        psi = lifespan_entropy(b, d, w) * w
        cb, cd = np.clip(b, lo, hi), np.clip(d, lo, hi)
        inside = cd > cb
        psi, cb, cd = psi[inside], cb[inside], cd[inside]
        beta[0] = 2.0 / width * np.sum(psi * (cd - cb))
        if n_coeffs > 1 and psi.size:
            n = np.arange(1, n_coeffs)
            diff = _fourier_phase(cb, n, width) - _fourier_phase(cd, n, width)
            beta[1:] = (2.0 / width) * (1j * width / (2 * np.pi * n)) * (diff @ psi)
    coeffs = np.concatenate([beta.real, beta.imag])
    coeffs[n_coeffs] = 0.0
    return CoefficientVector(kind, coeffs, (lo, hi))


def reconstruct_fapc(coeffs: CoefficientVector, grid_points: int = DEFAULT_GRID):
    """Evaluate the real Fourier partial sum on a uniform grid over the domain.

    Returns ``(x, samples)``; an empty-domain vector yields empty arrays.
    """
    if coeffs.kind not in ("AP_FAPC", "SP_FAPC"):
        raise ConfigError("reconstruct_fapc needs a Fourier coefficient vector")
    if coeffs.domain is None:
        return np.zeros(0), np.zeros(0)
    lo, hi = coeffs.domain
    x = np.linspace(lo, hi, grid_points)
    beta = coeffs.complex
    width = hi - lo
    n = np.arange(1, len(beta))
    r = np.fmod(x, width)
    theta = 2 * np.pi * np.multiply.outer(n, r) / width
    samples = beta[0].real / 2 + beta[1:].real @ np.cos(theta) + beta[1:].imag @ np.sin(theta)
    return x, samples


def reconstruct_hepc(coeffs: CoefficientVector, domain, grid_points: int = DEFAULT_GRID):
    """Evaluate ``sum alpha_n h_n(x)`` on a grid over ``domain`` (scaled axis).

    Uses the basis as printed for HEPC: ``h_n = c_n F_n(x) phi(x)`` with
    ``phi`` the standard normal density, i.e. the orthonormal Hermite
    function divided by ``sqrt(2 pi)``. Returns ``(x, samples)``.
    """
    if coeffs.kind != "HEPC":
        raise ConfigError("reconstruct_hepc needs an HEPC coefficient vector")
    if coeffs.n_coeffs > 170:
        raise OverflowGuardError("more than 170 Hermite terms (n! overflows double)")
    lo, hi = domain
    x = np.linspace(lo, hi, grid_points)
    basis = hermite_functions(x, coeffs.n_coeffs) * _INV_SQRT_2PI
    return x, coeffs.coeffs @ basis


def residual(curve: PersistenceCurve, x, approx) -> float:
    """Unnormalized sum of squared errors between the curve and samples at ``x``."""
    x = np.asarray(x, dtype=float)
    err = curve(x) - np.asarray(approx, dtype=float)
    return float(np.sum(err * err))


@dataclass
class FitConstants:
    """Per-source HEPC pre-scaling and SP-FAPC domains."""

    hepc_scale: dict = field(default_factory=dict)
    sp_domain: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, (lo, hi) in self.sp_domain.items():
            if not hi > lo:
                raise ConfigError(f"empty SP domain for {key}: ({lo}, {hi})")

    @classmethod
    def paper_defaults(cls) -> "FitConstants":
        """Values estimated on the pediatric airflow cohort (NCHSDB)."""
        return cls(
            hepc_scale={
                "rips_airflow_h0": 90442.544,
                "rips_airflow_h1": 55034.829,
                "sublevel_airflow_h0": 15909.436,
                "sublevel_irr_h0": 0.164,
            },
            sp_domain={
                "rips_airflow_h0": (0.0, 0.0002),
                "rips_airflow_h1": (0.0, 0.0005),
                "sublevel_airflow_h0": (-0.0015, 0.0015),
                "sublevel_irr_h0": (10.0, 50.0),
            },
        )

    def to_file(self, path):
        cp = configparser.ConfigParser()
        for key in sorted(set(self.hepc_scale) | set(self.sp_domain)):
            cp[key] = {}
            if key in self.hepc_scale:
                cp[key]["hepc_scale"] = repr(float(self.hepc_scale[key]))
            if key in self.sp_domain:
                lo, hi = self.sp_domain[key]
                cp[key]["sp_domain_min"] = repr(float(lo))
                cp[key]["sp_domain_max"] = repr(float(hi))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# HEPC scale and SP-FAPC domain per diagram source\n")
            cp.write(fh)

    @classmethod
    def from_file(cls, path) -> "FitConstants":
        cp = configparser.ConfigParser()
        if not cp.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read constants file {path}")
        scale, dom = {}, {}
        try:
            for key in cp.sections():
                sec = cp[key]
                if "hepc_scale" in sec:
                    scale[key] = float(sec["hepc_scale"])
                if "sp_domain_min" in sec or "sp_domain_max" in sec:
                    dom[key] = (float(sec["sp_domain_min"]), float(sec["sp_domain_max"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad constants file {path}: {exc}") from exc
        return cls(scale, dom)


def sp_domain(source, constants: FitConstants):
    """Preset domain for a diagram source (key such as ``"rips_airflow_h0"``)."""
    key = source.key if isinstance(source, PersistenceDiagram) else source
    try:
        return tuple(constants.sp_domain[key])
    except KeyError:
        raise ConfigError(f"no SP-FAPC domain configured for {key!r}") from None


def estimate_constants(diagrams_by_source: dict, sample_size: int | None = 10000,
                       seed: int = 0) -> FitConstants:
    """Estimate HEPC scales and SP domains from a sample of diagrams.

    For each source: scale = mean of ``5 / max|finite value|`` over the
    diagrams, SP domain = (25th percentile of curve-support minima, 75th
    percentile of curve-support maxima), linear interpolation between order
    statistics. When more than ``sample_size`` diagrams are given, a seeded
    random subset is used. Sources without any usable diagram are skipped
    with a warning.
    """
    rng = np.random.default_rng(seed)
    scales, domains = {}, {}
    for key in sorted(diagrams_by_source):
        dgms = list(diagrams_by_source[key])
        if sample_size is not None and len(dgms) > sample_size:
            pick = np.sort(rng.choice(len(dgms), size=sample_size, replace=False))
            dgms = [dgms[i] for i in pick]
        mags, lows, highs = [], [], []
        for dgm in dgms:
            dom = ap_domain(dgm)
            if dom is None:
                continue
            fin = dgm.finite().bars
            mag = float(np.max(np.abs(fin)))
            if mag > 0:
                mags.append(mag)
            lows.append(dom[0])
            highs.append(dom[1])
        if not lows:
            log.warning("no diagram with finite positive bars for %s; skipped", key)
            continue
        if mags:
            scales[key] = float(np.mean(5.0 / np.asarray(mags)))
        lo = float(np.percentile(lows, 25))
        hi = float(np.percentile(highs, 75))
        if hi > lo:
            domains[key] = (lo, hi)
        else:
            log.warning("degenerate SP domain for %s (%g, %g); skipped", key, lo, hi)
    return FitConstants(scales, domains)


__all__ = [
    "DIAGRAM_KEYS", "PersistenceCurve", "ZERO_CURVE", "CoefficientVector", "FitConstants",
    "lifespan_entropy", "entropy_curve", "hermite_functions", "hepc_coefficients",
    "fapc_coefficients", "ap_domain", "sp_domain", "reconstruct_fapc", "reconstruct_hepc",
    "residual", "estimate_constants",
]
