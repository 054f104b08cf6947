"""Partial-marking estimates from fringe visibility loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fringes import FringeTemplate, Histogram, _design, _linear_fit, fit_fringes, histogram


@dataclass(frozen=True)
class MarkingEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    visibility: float
    n: int


def _fixed_period_visibility(hist: Histogram, template: FringeTemplate, design: np.ndarray) -> float:
    y = hist.counts
    beta, _ = _linear_fit(design, y, 1.0 / np.sqrt(np.maximum(y, 1.0)))
    base = beta[0] + beta[1] if template.split_envelopes else beta[0]
    return float(np.hypot(beta[-2], beta[-1]) / base)


def estimate_marking(
    hist: Histogram,
    template: FringeTemplate,
    v_reference: float,
    n_boot: int = 200,
    seed: int = 0,
    confidence: float = 0.95,
) -> MarkingEstimate:
    """``p_hat = 1 - V_measured / V_reference`` with a multinomial bootstrap CI.

    The fringe period is held at the template value, which the scenario
    knows exactly.
    """
    if not v_reference > 0:
        raise ValueError("reference visibility must be positive")
    fit = fit_fringes(hist, template, refine_period=False)
    p_hat = 1.0 - fit.raw_visibility / v_reference
    n = int(hist.total)
    lo = hi = p_hat
    if n_boot > 0:
        design = _design(template, hist, template.period_m, True)
        probs = hist.counts / hist.total
        boots = np.empty(n_boot)
        for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_boot)):
            counts = np.random.default_rng(child).multinomial(n, probs).astype(float)
            boots[b] = 1.0 - _fixed_period_visibility(Histogram(hist.edges, counts), template, design) / v_reference
        alpha = 1.0 - confidence
        lo = min(float(np.quantile(boots, alpha / 2)), p_hat)
        hi = max(float(np.quantile(boots, 1 - alpha / 2)), p_hat)
    return MarkingEstimate(float(p_hat), lo, hi, fit.raw_visibility, n)


@dataclass
class MarkingScan:
    segment_edges: np.ndarray
    estimates: list[MarkingEstimate]

    @property
    def p_hat(self) -> np.ndarray:
        return np.array([e.p_hat for e in self.estimates])

    def step_index(self) -> int:
        """Index of the first segment after the largest jump in ``p_hat``."""
        return int(np.argmax(np.abs(np.diff(self.p_hat)))) + 1


def marking_scan(
    t, x, segment_edges, edges, template: FringeTemplate, v_reference: float, n_boot: int = 100, seed: int = 0
) -> MarkingScan:
    """Map ``p_hat`` over consecutive time segments (scan positions)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    segment_edges = np.asarray(segment_edges, dtype=float)
    seg = np.digitize(t, segment_edges) - 1
    estimates = [
        estimate_marking(histogram(x[seg == i], edges), template, v_reference, n_boot, seed + i)
        for i in range(len(segment_edges) - 1)
    ]
    return MarkingScan(segment_edges, estimates)
