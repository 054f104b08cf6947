"""Histograms, fringe fits, visibility estimators and peak finding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.ndimage import uniform_filter1d
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from ..optics import SignalArmModel

DEFAULT_BINS = 64
_GAUSS_NODES, _GAUSS_WEIGHTS = leggauss(8)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def total(self) -> float:
        return float(np.sum(self.counts))

    def __len__(self) -> int:
        return len(self.counts)


def position_edges(signal: SignalArmModel, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin edges spanning the signal grid (+-6 sigma by default)."""
    grid = signal.grid
    return np.linspace(grid[0], grid[-1], bins + 1)


def histogram(x, edges) -> Histogram:
    counts, edges = np.histogram(np.asarray(x, dtype=float), bins=edges)
    return Histogram(edges, counts.astype(float))


@dataclass(frozen=True)
class FringeTemplate:
    """Envelope shapes and seed period used to fit ``P + V Q cos``.

    ``P = (E_A^2 + E_B^2)/2`` and ``Q = E_A E_B``.  When both envelopes
    coincide this is ``E^2 (1 + V cos)``; ``sigma_m = None`` means a flat
    envelope.
    """

    period_m: float
    center_a_m: float = 0.0
    center_b_m: float = 0.0
    sigma_m: float | None = None
    phase_rad: float = 0.0

    @classmethod
    def from_signal(cls, signal: SignalArmModel, phase_rad: float = 0.0) -> "FringeTemplate":
        return cls(
            signal.fringe_period_m, signal.envelope_center_a_m, signal.envelope_center_b_m,
            signal.envelope_sigma_m, phase_rad,
        )

    @property
    def split_envelopes(self) -> bool:
        return self.sigma_m is not None and self.center_a_m != self.center_b_m

    def envelopes(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if self.sigma_m is None:
            one = np.ones_like(x)
            return one, one
        ea2 = np.exp(-(((x - self.center_a_m) / self.sigma_m) ** 2))
        eb2 = np.exp(-(((x - self.center_b_m) / self.sigma_m) ** 2))
        return ea2, eb2

    def components(self, x, period_m: float | None = None, phase_rad: float | None = None):
        """``P`` and ``Q cos(2 pi x / period + phase)`` at ``x``."""
        period = self.period_m if period_m is None else period_m
        phase = self.phase_rad if phase_rad is None else phase_rad
        ea2, eb2 = self.envelopes(x)
        return 0.5 * (ea2 + eb2), np.sqrt(ea2 * eb2) * np.cos(2 * np.pi * np.asarray(x) / period + phase)


@dataclass
class FringeFit:
    visibility: float
    phase: float
    period: float
    baseline: float
    residual: float
    converged: bool = True
    raw_visibility: float = float("nan")
    amplitudes: dict = field(default_factory=dict)
    message: str = ""


def _design(template: FringeTemplate, hist: Histogram, period: float, integrate: bool) -> np.ndarray:
    if integrate:
        half = 0.5 * hist.widths[:, None]
        xs = hist.centers[:, None] + half * _GAUSS_NODES[None, :]
        wts = 0.5 * _GAUSS_WEIGHTS[None, :]
    else:
        xs = hist.centers[:, None]
        wts = np.ones((1, 1))
    ea2, eb2 = template.envelopes(xs)
    q = np.sqrt(ea2 * eb2)
    k = 2 * np.pi / period
    cols = [ea2, eb2] if template.split_envelopes else [0.5 * (ea2 + eb2)]
    cols += [q * np.cos(k * xs), q * np.sin(k * xs)]
    scale = hist.widths[:, None] if integrate else 1.0
    return np.stack([np.sum(c * wts, axis=1) for c in cols], axis=1) * scale


def _linear_fit(design: np.ndarray, y: np.ndarray, weights: np.ndarray):
    a = design * weights[:, None]
    beta, *_ = np.linalg.lstsq(a, y * weights, rcond=None)
    resid = (y - design @ beta) * weights
    return beta, float(resid @ resid)


def fit_fringes(
    hist: Histogram,
    template: FringeTemplate,
    refine_period: bool = True,
    integrate_bins: bool = True,
    poisson_weights: bool = True,
    min_bins: int = 16,
    min_counts: float = 1000,
) -> FringeFit:
    """Least-squares fit of ``baseline * [P + V Q cos(2 pi x / period + phase)]``.

    The amplitudes enter linearly and are solved exactly for each trial
    period; only the period is refined numerically, within +-20 % of the
    template seed.  With ``integrate_bins`` the model is averaged over each
    bin (8-point Gauss-Legendre), so coarse binning does not bias the
    visibility.

    ``V`` is the cross-term amplitude over the fringe-free amplitude, i.e. the
    local visibility where both envelopes are equal.
    """
    if len(hist) < min_bins:
        raise ValueError(f"fringe fit needs at least {min_bins} bins, got {len(hist)}")
    if hist.total < min_counts:
        raise ValueError(f"fringe fit needs at least {min_counts:g} counts, got {hist.total:g}")
    y = np.asarray(hist.counts, dtype=float)
    weights = 1.0 / np.sqrt(np.maximum(y, 1.0)) if poisson_weights else np.ones_like(y)

    def rss(period):
        return _linear_fit(_design(template, hist, period, integrate_bins), y, weights)[1]

    period = template.period_m
    converged, message = True, ""
    if refine_period:
        res = minimize_scalar(
            rss, bounds=(0.8 * period, 1.2 * period), method="bounded",
            options={"xatol": period * 1e-11, "maxiter": 500},
        )
        converged = bool(res.success)
        message = str(res.message)
        # the bounded search can miss a sharp minimum near the seed
        period = float(res.x) if res.fun <= rss(period) else period

    design = _design(template, hist, period, integrate_bins)
    beta, chi2 = _linear_fit(design, y, weights)
    base = float(beta[0] + beta[1]) if template.split_envelopes else float(beta[0])
    cc, cs = beta[-2], beta[-1]
    amp = math.hypot(cc, cs)
    raw_v = amp / base if base > 0 else float("nan")
    if not (base > 0 and math.isfinite(raw_v)):
        converged, message = False, "non-positive fringe-free amplitude"
    dof = max(len(y) - design.shape[1] - int(refine_period), 1)
    amplitudes = {"fringe_cos": float(cc), "fringe_sin": float(cs)}
    if template.split_envelopes:
        amplitudes.update(envelope_a=float(beta[0]), envelope_b=float(beta[1]))
    return FringeFit(
        visibility=float(np.clip(raw_v, 0.0, 1.0)) if math.isfinite(raw_v) else float("nan"),
        phase=math.atan2(-cs, cc),
        period=period,
        baseline=base,
        residual=chi2 / dof,
        converged=converged,
        raw_visibility=raw_v,
        amplitudes=amplitudes,
        message=message,
    )


def wrap_phase(phi: float) -> float:
    """Wrap into (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


def phase_difference(a: FringeFit, b: FringeFit) -> float:
    """``|wrap(a.phase - b.phase)|`` in [0, pi]."""
    return abs(wrap_phase(a.phase - b.phase))


class VisibilityEstimator:
    """Unbiased per-event visibility for patterns ``P + V Q cos(2 pi x/period + phase)``.

    Uses the score-like statistic ``w(x) = Q cos / P``: its mean under the
    pattern is ``(z1 + V m1) / (Z0 + V z1)`` with the integrals below taken
    over the histogram range, which inverts in closed form.  This lets window
    and slot visibilities be computed with cumulative sums.
    """

    def __init__(self, template: FringeTemplate, lo: float, hi: float, n_grid: int = 8193):
        x = np.linspace(lo, hi, n_grid)
        p, qc = template.components(x)
        self.template = template
        self.lo, self.hi = lo, hi
        self._z0 = float(np.trapezoid(p, x))
        self._z1 = float(np.trapezoid(qc, x))
        self._m1 = float(np.trapezoid(qc * qc / p, x))

    def weights(self, x) -> np.ndarray:
        p, qc = self.template.components(x)
        return qc / p

    def from_mean(self, w_mean):
        w_mean = np.asarray(w_mean, dtype=float)
        return (w_mean * self._z0 - self._z1) / (self._m1 - w_mean * self._z1)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            return float("nan")
        return float(self.from_mean(np.mean(self.weights(x))))


def peak_positions(
    hist: Histogram,
    min_separation: float = 0.0,
    smoothing_bins: int = 3,
    prominence_fraction: float = 0.05,
) -> list[float]:
    """Local maxima of the moving-average smoothed histogram.

    Peaks need a prominence of ``prominence_fraction`` of the smoothed
    maximum.  Positions are refined by a parabola through the three bins
    around each maximum; flat-topped peaks report their left edge.
    """
    y = np.asarray(hist.counts, dtype=float)
    if len(y) < 3 or not np.any(y > 0):
        return []
    smooth = uniform_filter1d(y, size=smoothing_bins, mode="nearest") if smoothing_bins > 1 else y
    width = float(np.mean(hist.widths))
    distance = max(1, int(round(min_separation / width))) if min_separation > 0 else 1
    idx, props = find_peaks(smooth, prominence=prominence_fraction * smooth.max(), distance=distance, plateau_size=1)
    centers = hist.centers
    out = []
    for i, left, right in zip(idx, props["left_edges"], props["right_edges"]):
        if right > left:
            out.append(float(centers[left]))
            continue
        y0, y1, y2 = smooth[i - 1], smooth[i], smooth[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom < 0 else 0.0
        out.append(float(centers[i] + np.clip(shift, -0.5, 0.5) * width))
    return sorted(out)
