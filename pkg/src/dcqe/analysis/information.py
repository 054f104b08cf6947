"""Binned mutual information with bias correction, and two-sample KS checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class MIEstimate:
    mi_bits: float
    ci_low: float
    ci_high: float
    n: int
    plugin_bits: float = float("nan")
    n_boot: int = 0


def _entropy_bits(counts: np.ndarray, n: float) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log2(p)))


def _miller_madow_mi(table: np.ndarray) -> tuple[float, float]:
    """Plug-in and Miller-Madow corrected MI (bits) of a contingency table."""
    n = float(table.sum())
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_row = _entropy_bits(row, n)
    h_col = _entropy_bits(col, n)
    h_joint = _entropy_bits(table.ravel(), n)
    plugin = h_row + h_col - h_joint
    # each entropy gains (m - 1) / (2 N) nats, m = occupied cells
    m_row, m_col, m_joint = (np.count_nonzero(a) for a in (row, col, table))
    correction = ((m_row - 1) + (m_col - 1) - (m_joint - 1)) / (2.0 * n * math.log(2.0))
    return plugin, plugin + correction


def contingency(labels, outcomes) -> np.ndarray:
    labels = np.asarray(labels)
    outcomes = np.asarray(outcomes)
    _, li = np.unique(labels, return_inverse=True)
    _, oi = np.unique(outcomes, return_inverse=True)
    table = np.zeros((li.max() + 1, oi.max() + 1))
    np.add.at(table, (li, oi), 1.0)
    return table


def estimate_mutual_information(
    labels,
    outcomes,
    n_boot: int = 200,
    seed: int = 0,
    confidence: float = 0.95,
) -> MIEstimate:
    """MI between a setting label and a binned D0 outcome, in bits per detection.

    The point estimate is the plug-in MI with the Miller-Madow correction,
    clipped to ``[0, log2(#settings)]``.  The interval is a basic bootstrap
    over ``n_boot`` multinomial resamples of the contingency table, each with
    its own seed substream, clipped to the valid range and widened if needed
    to contain the point estimate.

    Raises
    ------
    ValueError
        If fewer than two distinct labels are present.
    """
    labels = np.asarray(labels)
    outcomes = np.asarray(outcomes)
    if labels.shape != outcomes.shape:
        raise ValueError("labels and outcomes must have the same length")
    table = contingency(labels, outcomes)
    if table.shape[0] < 2:
        raise ValueError("mutual information needs at least two distinct settings")
    n = int(table.sum())
    upper = math.log2(table.shape[0])
    plugin, corrected = _miller_madow_mi(table)
    mi = float(np.clip(corrected, 0.0, upper))

    lo = hi = mi
    if n_boot > 0:
        p = table.ravel() / n
        boots = np.empty(n_boot)
        for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_boot)):
            resample = np.random.default_rng(child).multinomial(n, p).reshape(table.shape).astype(float)
            boots[b] = _miller_madow_mi(resample)[1]
        boots = np.clip(boots, 0.0, upper)
        alpha = 1.0 - confidence
        # basic (pivot) interval: in the bootstrap world the true MI is the
        # plug-in value of the observed table, so resample spread is measured
        # from there; percentile intervals inherit the plug-in bias near 0
        q_lo, q_hi = np.quantile(boots, [alpha / 2, 1 - alpha / 2])
        lo = float(np.clip(mi + plugin - q_hi, 0.0, mi))
        hi = float(np.clip(mi + plugin - q_lo, mi, upper))
    return MIEstimate(mi, lo, hi, n, plugin, n_boot)


def ks_two_sample(a, b) -> tuple[float, float]:
    """KS statistic and p-value for two samples."""
    res = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(res.statistic), float(res.pvalue)
