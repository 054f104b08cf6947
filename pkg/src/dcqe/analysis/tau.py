"""Inter-emission interval (tau) dependence of the D0 pattern."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .fringes import FringeTemplate, fit_fringes, histogram
from .information import ks_two_sample


@dataclass
class TauBin:
    tau_s: float
    n: int
    visibility: float


@dataclass
class TauBinReport:
    bins: list[TauBin]
    ks: dict[tuple[int, int], tuple[float, float]]  # (i, j) -> (statistic, p-value)
    alpha: float
    tau_c_hat: float = float("nan")
    visibility_scale_hat: float = float("nan")
    notes: list[str] = field(default_factory=list)

    @property
    def pair_alpha(self) -> float:
        return self.alpha / max(len(self.ks), 1)

    def rejected_pairs(self) -> list[tuple[int, int]]:
        return [pair for pair, (_, p) in self.ks.items() if p < self.pair_alpha]

    @property
    def rejects(self) -> bool:
        """Any pair differs at the Bonferroni-corrected level."""
        return bool(self.rejected_pairs())


def _exp_decay(tau, scale, tau_c):
    return scale * np.exp(-tau / tau_c)


def tau_dependence_test(
    x,
    tau,
    edges,
    template: FringeTemplate,
    tau_edges=None,
    alpha: float = 0.01,
    min_events: int = 10_000,
) -> TauBinReport:
    """KS tests between tau groups and a fit of ``V(tau) = V_c exp(-tau/tau_c)``.

    ``tau`` is each D0 event's time since the previous emission.  Events are
    grouped by ``tau_edges`` if given, else by distinct ``tau`` values.  Each
    pair of groups gets a two-sample KS test on position; the family is
    judged at ``alpha`` with a Bonferroni split.
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if tau_edges is None:
        keys, groups = np.unique(np.round(tau, 12), return_inverse=True)
    else:
        groups = np.digitize(tau, tau_edges) - 1
        keys = np.arange(len(tau_edges) - 1)
    members = [np.flatnonzero(groups == g) for g in range(len(keys))]
    members = [m for m in members if len(m)]
    if len(members) < 3:
        raise ValueError(f"tau test needs at least 3 populated tau bins, got {len(members)}")
    small = [len(m) for m in members if len(m) < min_events]
    if small:
        raise ValueError(f"tau bins need >= {min_events} events; smallest has {min(small)}")

    bins = []
    for m in members:
        fit = fit_fringes(histogram(x[m], edges), template, refine_period=False)
        bins.append(TauBin(float(np.mean(tau[m])), len(m), fit.visibility))
    ks = {
        (i, j): ks_two_sample(x[members[i]], x[members[j]])
        for i, j in itertools.combinations(range(len(members)), 2)
    }
    report = TauBinReport(bins, ks, alpha)

    taus = np.array([b.tau_s for b in bins])
    vis = np.array([b.visibility for b in bins])
    if vis.max() < 0.05:
        report.notes.append("no fringes in any tau bin; tau_c not identifiable")
        return report
    try:
        guess_tau = float(np.median(taus))
        popt, _ = curve_fit(
            _exp_decay, taus, vis, p0=(min(1.0, vis.max() * 1.2), guess_tau),
            sigma=np.sqrt(2.0 / np.array([b.n for b in bins])), bounds=([0, 0], [1.5, np.inf]),
        )
        report.visibility_scale_hat, report.tau_c_hat = float(popt[0]), float(popt[1])
    except (RuntimeError, ValueError) as exc:
        report.notes.append(f"tau_c fit failed: {exc}")
    if not math.isfinite(report.tau_c_hat):
        report.notes.append("tau_c not recovered")
    return report
