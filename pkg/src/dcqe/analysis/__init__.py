"""Observables computed from detection-event streams."""

from .coincidence import CoincidencePair, Coincidences, match_coincidences
from .fringes import (
    FringeFit,
    FringeTemplate,
    Histogram,
    VisibilityEstimator,
    fit_fringes,
    histogram,
    peak_positions,
    phase_difference,
    position_edges,
)
from .information import MIEstimate, estimate_mutual_information, ks_two_sample
from .marking import MarkingEstimate, MarkingScan, estimate_marking, marking_scan
from .messaging import DecodedMessage, decode_message
from .onset import OnsetEstimate, OnsetHypotheses, cusum_changepoint, detect_onset, visibility_series
from .tau import TauBinReport, tau_dependence_test

__all__ = [
    "CoincidencePair",
    "Coincidences",
    "DecodedMessage",
    "FringeFit",
    "FringeTemplate",
    "Histogram",
    "MIEstimate",
    "MarkingEstimate",
    "MarkingScan",
    "OnsetEstimate",
    "OnsetHypotheses",
    "TauBinReport",
    "VisibilityEstimator",
    "cusum_changepoint",
    "decode_message",
    "detect_onset",
    "estimate_marking",
    "estimate_mutual_information",
    "fit_fringes",
    "histogram",
    "ks_two_sample",
    "marking_scan",
    "match_coincidences",
    "peak_positions",
    "phase_difference",
    "position_edges",
    "tau_dependence_test",
    "visibility_series",
]
