"""Windowed visibility series and CUSUM onset detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..optics import SPEED_OF_LIGHT
from ..scenarios import ModelKind, TriggerSchedule
from .fringes import VisibilityEstimator

MIN_WINDOW = 500


@dataclass(frozen=True)
class OnsetHypotheses:
    """Predicted D0 onsets for a change sent at ``t_send``."""

    remote_distance_m: float
    kappa_past: float = 1.0

    def predictions(self, t_send: float) -> dict[ModelKind, float]:
        light = self.remote_distance_m / SPEED_OF_LIGHT
        return {
            ModelKind.FUTURE_HS: t_send,
            ModelKind.PRESENT_HS: t_send + light,
            ModelKind.PAST_HS: t_send + (1.0 + self.kappa_past) * light,
        }

    def lag(self, kind: ModelKind) -> float:
        return self.predictions(0.0).get(ModelKind(kind), 0.0)


@dataclass
class VisibilitySeries:
    t_start: np.ndarray
    t_end: np.ndarray
    visibility: np.ndarray

    @property
    def t_mid(self) -> np.ndarray:
        return 0.5 * (self.t_start + self.t_end)


@dataclass
class OnsetEstimate:
    t_hat: float
    ci: float
    model_verdict: str
    statistic: float = float("nan")
    shift: float = float("nan")
    predictions: dict = field(default_factory=dict)
    series: VisibilitySeries | None = None


def visibility_series(t, x, window: int, estimator: VisibilityEstimator) -> VisibilitySeries:
    """Visibility of consecutive, non-overlapping windows of ``window`` events."""
    order = np.argsort(t, kind="stable")
    t = np.asarray(t, dtype=float)[order]
    w = estimator.weights(np.asarray(x, dtype=float)[order])
    m = len(t) // window
    if m < 1:
        return VisibilitySeries(np.array([]), np.array([]), np.array([]))
    w_mean = w[: m * window].reshape(m, window).mean(axis=1)
    tb = t[: m * window].reshape(m, window)
    return VisibilitySeries(tb[:, 0], tb[:, -1], estimator.from_mean(w_mean))


def cusum_changepoint(series: np.ndarray) -> tuple[int, float, float]:
    """Single mean-shift changepoint of ``series``.

    Returns ``(k, stat, shift)``: the change happens after index ``k``;
    ``stat`` is ``max |S_k| / (sigma sqrt(m))`` with ``S_k`` the centred
    cumulative sum and ``sigma`` a MAD estimate from first differences, so
    that under no change it follows the sup of a Brownian bridge.
    """
    v = np.asarray(series, dtype=float)
    m = len(v)
    if m < 4:
        return -1, 0.0, 0.0
    s = np.cumsum(v - v.mean())[:-1]
    k = int(np.argmax(np.abs(s)))
    diffs = np.diff(v)
    sigma = 1.4826 * np.median(np.abs(diffs - np.median(diffs))) / math.sqrt(2.0)
    if sigma <= 0:
        sigma = float(np.std(v)) or 1e-12
    stat = float(abs(s[k]) / (sigma * math.sqrt(m)))
    shift = float(v[k + 1 :].mean() - v[: k + 1].mean())
    return k, stat, shift


def detect_onset(
    t,
    x,
    window_emissions: int,
    schedule: TriggerSchedule,
    estimator: VisibilityEstimator,
    hypotheses: OnsetHypotheses | None = None,
    threshold: float = 2.0,
    min_shift: float = 0.1,
) -> OnsetEstimate:
    """Locate a visibility change in a D0 stream and attribute it to a model.

    Raises
    ------
    ValueError
        If the window is below 500 emissions or the stream holds fewer than
        four windows.
    """
    if window_emissions < MIN_WINDOW:
        raise ValueError(f"onset window must be at least {MIN_WINDOW} emissions")
    if len(t) < 4 * window_emissions:
        raise ValueError(f"stream too short: {len(t)} events for window {window_emissions}")
    hypotheses = hypotheses or OnsetHypotheses(schedule.remote_distance_m)
    series = visibility_series(t, x, window_emissions, estimator)
    k, stat, shift = cusum_changepoint(series.visibility)

    t_send = float(schedule.send_times[0]) if schedule.changes else float("nan")
    predictions = hypotheses.predictions(t_send) if schedule.changes else {}
    if k < 0 or stat < threshold or abs(shift) < min_shift:
        return OnsetEstimate(float("nan"), float("nan"), "NO_CHANGE", stat, shift, predictions, series)

    t_hat = float(series.t_start[k + 1])
    ci = float(np.median(series.t_end - series.t_start))
    if predictions:
        verdict = min(predictions, key=lambda kind: abs(predictions[kind] - t_hat)).value
    else:
        verdict = "UNSCHEDULED_CHANGE"
    return OnsetEstimate(t_hat, ci, verdict, stat, shift, {kk.value: v for kk, v in predictions.items()}, series)
