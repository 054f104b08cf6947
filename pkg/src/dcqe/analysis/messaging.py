"""Decoding a trigger-schedule message from D0 visibility alone."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .fringes import VisibilityEstimator

MIN_SLOT_EVENTS = 100


@dataclass
class DecodedMessage:
    bits: list[int]
    slot_visibility: np.ndarray
    slot_counts: np.ndarray
    low_confidence: list[int] = field(default_factory=list)
    bit_error_rate: float | None = None
    ber_ci: tuple[float, float] | None = None

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)


def decode_message(
    t,
    x,
    n_bits: int,
    symbol_period_s: float,
    estimator: VisibilityEstimator,
    conjectured_visibility: float,
    start_s: float = 0.0,
    onset_lag_s: float = 0.0,
    truth: str | list[int] | None = None,
) -> DecodedMessage:
    """Threshold each symbol slot's D0 visibility at half the conjectured value.

    Slot ``i`` covers ``[start + i T, start + (i+1) T)`` shifted by the onset
    lag of the model hypothesis.  High visibility decodes as 0 (ERASE), low
    as 1 (MARK).  Slots with fewer than 100 events are flagged.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    slot = np.floor((t - start_s - onset_lag_s) / symbol_period_s).astype(np.int64)
    vis = np.full(n_bits, np.nan)
    counts = np.zeros(n_bits, dtype=np.int64)
    for i in range(n_bits):
        sel = slot == i
        counts[i] = int(sel.sum())
        if counts[i]:
            vis[i] = estimator(x[sel])
    threshold = 0.5 * conjectured_visibility
    bits = [int(not (v >= threshold)) for v in vis]  # NaN slots decode as 1
    low = [i for i in range(n_bits) if counts[i] < MIN_SLOT_EVENTS]
    result = DecodedMessage(bits, vis, counts, low)
    if truth is not None:
        truth_bits = [int(b) for b in truth]
        if len(truth_bits) != n_bits:
            raise ValueError("ground-truth message length differs from n_bits")
        errors = sum(a != b for a, b in zip(bits, truth_bits))
        result.bit_error_rate = errors / n_bits
        ci = binomtest(errors, n_bits).proportion_ci(0.95)
        result.ber_ci = (float(ci.low), float(ci.high))
    return result
