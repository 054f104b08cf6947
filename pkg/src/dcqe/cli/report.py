"""Stream analysis: the report document, CSV tables and SVG plots."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..analysis import (
    FringeFit,
    FringeTemplate,
    Histogram,
    VisibilityEstimator,
    decode_message,
    detect_onset,
    estimate_mutual_information,
    fit_fringes,
    histogram,
    ks_two_sample,
    marking_scan,
    match_coincidences,
    peak_positions,
    phase_difference,
    position_edges,
    tau_dependence_test,
)
from ..analysis.onset import OnsetHypotheses
from ..optics import transfer_coefficients
from ..scenarios import D0, EventStream, ModelKind, Setting
from ..spacetime import audit_topology
from .config import ScenarioConfig
from .plots import Plot

ERASER_CLASS, WHICH_PATH_CLASS = "erase", "mark"
MIN_FIT_COUNTS = 1000


@dataclass
class AnalysisReport:
    """Everything ``analyze`` computes, plus the files it wrote."""

    data: dict[str, Any]
    files: list[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fit_dict(fit: FringeFit) -> dict:
    return {
        "visibility": fit.visibility,
        "raw_visibility": fit.raw_visibility,
        "phase_rad": fit.phase,
        "period_m": fit.period,
        "reduced_chi2": fit.residual,
        "converged": fit.converged,
    }


def _fit_curve(fit: FringeFit, template: FringeTemplate, hist: Histogram) -> np.ndarray:
    """Expected counts per bin under the fitted model."""
    from ..analysis.fringes import _design

    a = fit.amplitudes
    if template.split_envelopes:
        beta = [a["envelope_a"], a["envelope_b"], a["fringe_cos"], a["fringe_sin"]]
    else:
        beta = [fit.baseline, a["fringe_cos"], a["fringe_sin"]]
    return _design(template, hist, fit.period, True) @ np.asarray(beta)


class _Writer:
    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.files: list[str] = []

    def csv(self, name: str, header: list[str], rows) -> None:
        path = self.outdir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.10g}" if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(name)

    def svg(self, name: str, plot: Plot) -> None:
        (self.outdir / name).write_text(plot.to_svg())
        self.files.append(name)

    def histogram(self, stem: str, title: str, hist: Histogram, fit: FringeFit | None, template: FringeTemplate):
        curve = _fit_curve(fit, template, hist) if fit is not None else None
        rows = zip(hist.edges[:-1], hist.edges[1:], hist.counts, curve if curve is not None else [""] * len(hist))
        self.csv(f"{stem}.csv", ["x_lo_m", "x_hi_m", "counts", "fit_counts"], rows)
        plot = Plot(title, "x at D0 (mm)", "counts per bin").add("counts", hist.centers * 1e3, hist.counts, "step")
        if curve is not None:
            plot.add("fit", hist.centers * 1e3, curve)
        self.svg(f"{stem}.svg", plot)


def _class_of(tcs: list, detector: str) -> str:
    for tc in tcs:
        if detector in tc.detectors:
            return ERASER_CLASS if len(tc.sources_reaching(detector)) == 2 else WHICH_PATH_CLASS
    return WHICH_PATH_CLASS


def analyze_stream(
    cfg: ScenarioConfig,
    stream: EventStream,
    outdir: str | os.PathLike | None = None,
    seed: int | None = None,
) -> AnalysisReport:
    """Run every applicable analysis on ``stream`` and (optionally) write files.

    Sections that do not apply to the scenario, or lack data, are recorded
    with a ``skipped`` reason rather than dropped.
    """
    scenario, model, opts = cfg.scenario, cfg.model, cfg.analysis
    writer = _Writer(Path(outdir)) if outdir is not None else None
    if writer is not None:
        writer.outdir.mkdir(parents=True, exist_ok=True)

    stream = stream.sorted_by_time()
    signal = stream.signal()
    idler = stream.idler()
    edges = position_edges(scenario.signal, opts["histogram_bins"])
    template_qm = FringeTemplate.from_signal(scenario.signal)
    tcs = [transfer_coefficients(g) for g in scenario.graphs()]
    delays = {D0: scenario.signal_delay_s}
    for tc in tcs:
        delays.update(tc.delay)

    rep: dict[str, Any] = {
        "scenario": scenario.name,
        "scenario_hash": cfg.hash,
        "seed": cfg.seed if seed is None else seed,
        "model": model.kind.value,
        "n_events": len(stream),
        "counts": stream.counts(),
        "duration_s": float(stream.t[-1] - stream.t[0]) if len(stream) else 0.0,
    }

    # coincidences and per-detector fringes
    co = match_coincidences(signal, idler, opts["coincidence_window_ns"] * 1e-9, delays)
    rep["coincidences"] = {"n": len(co), "match_rate": co.match_rate, "window_ns": opts["coincidence_window_ns"]}
    x_sig = signal.x[co.signal_index]
    det_idl = idler.detector[co.idler_index]
    per_det: dict[str, Any] = {}
    fits: dict[str, FringeFit] = {}
    classes: dict[str, str] = {}
    for name in scenario.detector_names[1:]:
        xs = x_sig[det_idl == stream.code(name)]
        hist = histogram(xs, edges)
        classes[name] = _class_of(tcs, name)
        entry: dict[str, Any] = {"n": int(len(xs)), "class": classes[name]}
        fit = None
        if len(xs) >= MIN_FIT_COUNTS:
            fit = fit_fringes(hist, template_qm)
            fits[name] = fit
            entry.update(_fit_dict(fit))
            entry["peaks_m"] = peak_positions(hist, min_separation=0.5 * fit.period) if fit.visibility < 0.1 else None
        else:
            entry["skipped"] = f"fewer than {MIN_FIT_COUNTS} coincidences"
        per_det[name] = entry
        if writer is not None and len(xs):
            writer.histogram(f"fringe_D0x{name}", f"D0 x {name} coincidences", hist, fit, template_qm)
    rep["detectors"] = per_det

    eraser = [n for n in fits if classes[n] == ERASER_CLASS]
    if len(eraser) >= 2:
        a, b = eraser[:2]
        rep["phase_difference"] = {"detectors": [a, b], "rad": phase_difference(fits[a], fits[b])}
    which = [n for n in per_det if classes[n] == WHICH_PATH_CLASS and per_det[n]["n"]]
    if len(which) >= 2:
        pooled_x = x_sig[np.isin(det_idl, [stream.code(n) for n in which])]
        pooled = histogram(pooled_x, edges)
        rep["which_path_pooled"] = {
            "detectors": which,
            "n": int(len(pooled_x)),
            "peaks_m": peak_positions(pooled, min_separation=0.5 * scenario.signal.fringe_period_m),
        }
        if writer is not None:
            writer.histogram("which_path_pooled", "D0 x pooled which-path coincidences", pooled, None, template_qm)

    # D0 marginal
    marg = histogram(signal.x, edges)
    template_d0 = FringeTemplate.from_signal(scenario.signal, model.fringe_phase_rad)
    rep["d0_marginal"] = {"n": len(signal)}
    if len(signal) >= MIN_FIT_COUNTS:
        mfit = fit_fringes(marg, template_d0)
        rep["d0_marginal"].update(_fit_dict(mfit))
    else:
        mfit = None
    if writer is not None:
        writer.histogram("d0_marginal", "D0 marginal (no coincidence filter)", marg, mfit, template_d0)

    # mutual information between remote setting (or idler class) and D0 bin
    rep["mutual_information"] = _mi_section(stream, signal, idler, co, classes, edges, opts, seed)

    # onset, tau, marking, message
    estimator = VisibilityEstimator(template_d0, edges[0], edges[-1])
    rep["onset"] = _onset_section(cfg, signal, estimator, writer)
    rep["tau"] = _tau_section(cfg, signal, edges, template_d0, writer)
    rep["marking_scan"] = _scan_section(cfg, signal, edges, template_d0, writer)
    rep["message"] = _message_section(cfg, signal, estimator)

    try:
        rep["audit"] = audit_topology(scenario).to_dict()
    except KeyError as exc:
        rep["audit"] = {"skipped": str(exc.args[0])}

    report = AnalysisReport(_jsonable(rep))
    if writer is not None:
        (writer.outdir / "report.json").write_text(report.to_json())
        writer.files.append("report.json")
        report.files = sorted(writer.files)
    return report


def _mi_section(stream, signal, idler, co, classes, edges, opts, seed) -> dict:
    bins = np.clip(np.digitize(signal.x, edges) - 1, 0, len(edges) - 2)
    present = np.unique(signal.setting)
    if len(present) >= 2:
        labels = np.array([Setting.from_code(c).value for c in signal.setting])
        outcomes = bins
        label_kind = "setting_in_effect"
    else:
        cls = np.array([classes[stream.detector_names[d]] for d in idler.detector[co.idler_index]])
        if len(np.unique(cls)) < 2:
            return {"skipped": "only one remote setting and one idler class present"}
        labels, outcomes = cls, bins[co.signal_index]
        label_kind = "idler_class"
    boot_seed = opts["bootstrap_seed"] if seed is None else seed
    est = estimate_mutual_information(labels, outcomes, n_boot=opts["mi_bootstrap"], seed=boot_seed)
    groups = sorted(set(labels.tolist()))
    x_all = signal.x if label_kind == "setting_in_effect" else signal.x[co.signal_index]
    ks_stat, ks_p = ks_two_sample(x_all[labels == groups[0]], x_all[labels == groups[1]])
    return {
        "labels": label_kind,
        "groups": groups,
        "mi_bits": est.mi_bits,
        "plugin_bits": est.plugin_bits,
        "ci95": [est.ci_low, est.ci_high],
        "n": est.n,
        "ks_statistic": ks_stat,
        "ks_p_value": ks_p,
        "ks_rejects_at_0.01": bool(ks_p < 0.01),
    }


def _onset_section(cfg: ScenarioConfig, signal: EventStream, estimator, writer) -> dict:
    schedule = cfg.scenario.schedule
    opts = cfg.analysis
    if not schedule.changes or cfg.message:
        return {"skipped": "schedule has no single trigger change"}
    window = opts["onset_window_emissions"]
    try:
        est = detect_onset(
            signal.t, signal.x, window, schedule, estimator,
            OnsetHypotheses(schedule.remote_distance_m, opts["kappa_past"]),
            opts["cusum_threshold"], opts["min_visibility_shift"],
        )
    except ValueError as exc:
        return {"skipped": str(exc)}
    series = est.series
    if writer is not None and series is not None:
        writer.csv("visibility_series.csv", ["t_start_s", "t_end_s", "visibility"],
                   zip(series.t_start, series.t_end, series.visibility))
        plot = Plot("D0 visibility per window", "t (s)", "visibility").add("V", series.t_mid, series.visibility)
        plot.marker("onset", est.t_hat)
        writer.svg("visibility_series.svg", plot)
    return {
        "t_send_s": float(schedule.send_times[0]),
        "t_hat_s": est.t_hat,
        "ci_s": est.ci,
        "model_verdict": est.model_verdict,
        "cusum_statistic": est.statistic,
        "visibility_shift": est.shift,
        "predictions_s": est.predictions,
        "window_emissions": window,
    }


def _tau_section(cfg: ScenarioConfig, signal: EventStream, edges, template, writer) -> dict:
    plan = cfg.scenario.emission
    times = plan.times(cfg.n_emissions)
    gaps = plan.gaps(times)[signal.emission_index]
    if len(np.unique(np.round(gaps, 12))) < 3:
        return {"skipped": "fewer than three distinct inter-emission intervals"}
    try:
        tr = tau_dependence_test(signal.x, gaps, edges, template, alpha=cfg.analysis["ks_alpha"],
                                 min_events=cfg.analysis["tau_min_events"])
    except ValueError as exc:
        return {"skipped": str(exc)}
    if writer is not None:
        writer.csv("tau_bins.csv", ["tau_s", "n", "visibility"], [(b.tau_s, b.n, b.visibility) for b in tr.bins])
    return {
        "bins": [{"tau_s": b.tau_s, "n": b.n, "visibility": b.visibility} for b in tr.bins],
        "ks": [{"pair": list(k), "statistic": s, "p_value": p} for k, (s, p) in tr.ks.items()],
        "alpha": tr.alpha,
        "pair_alpha": tr.pair_alpha,
        "rejects": tr.rejects,
        "tau_c_hat_s": tr.tau_c_hat,
        "visibility_scale_hat": tr.visibility_scale_hat,
        "notes": tr.notes,
    }


def _scan_section(cfg: ScenarioConfig, signal: EventStream, edges, template, writer) -> dict:
    n_seg = cfg.analysis["scan_segments"]
    if n_seg < 2:
        return {"skipped": "scan_segments not set"}
    times = cfg.scenario.emission.times(cfg.n_emissions)
    seg_edges = np.linspace(times[0], times[-1], n_seg + 1)
    seg_edges[-1] = np.nextafter(seg_edges[-1], np.inf)
    t_emit = times[signal.emission_index]
    v_ref = cfg.model.conjectured_visibility
    try:
        scan = marking_scan(t_emit, signal.x, seg_edges, edges, template, v_ref, seed=cfg.analysis["bootstrap_seed"])
    except ValueError as exc:
        return {"skipped": str(exc)}
    mids = 0.5 * (seg_edges[:-1] + seg_edges[1:])
    if writer is not None:
        writer.csv("marking_scan.csv", ["segment", "t_start_s", "t_end_s", "p_hat", "ci_low", "ci_high", "n"],
                   [(i, seg_edges[i], seg_edges[i + 1], e.p_hat, e.ci_low, e.ci_high, e.n)
                    for i, e in enumerate(scan.estimates)])
        plot = Plot("Marking fraction per scan position", "emission time (s)", "p_hat")
        plot.add("p_hat", mids, scan.p_hat, "points").add("p_hat", mids, scan.p_hat)
        step = scan.step_index()
        plot.marker("step", float(seg_edges[step]))
        writer.svg("marking_scan.svg", plot)
    # segment holding the first change of the configured p_mark curve, which
    # is given in effective time t_emit + signal delay + kappa D / c
    curve = cfg.model.marking_probability
    configured = None
    if not isinstance(curve, (int, float)) and len(curve) > 1:
        scen = cfg.scenario
        kappa = cfg.model.resolve_kappa(scen.geometry.signal_path_m, scen.schedule.remote_distance_m)
        t_break = curve[1][0] - scen.signal_delay_s - kappa * scen.schedule.light_time_s
        configured = int(np.clip(np.searchsorted(seg_edges, t_break, side="right") - 1, 0, n_seg - 1))
    return {
        "v_reference": v_ref,
        "configured_step_index": configured,
        "segments": [
            {"t_start_s": seg_edges[i], "t_end_s": seg_edges[i + 1], "p_hat": e.p_hat, "ci95": [e.ci_low, e.ci_high],
             "n": e.n}
            for i, e in enumerate(scan.estimates)
        ],
        "step_index": scan.step_index(),
        "step_t_s": float(seg_edges[scan.step_index()]),
    }


def _message_section(cfg: ScenarioConfig, signal: EventStream, estimator) -> dict:
    msg = cfg.message
    if not msg:
        return {"skipped": "no message in schedule"}
    model = cfg.model
    if model.kind is ModelKind.QM_BASELINE:
        lag = 0.0
    else:
        lag = OnsetHypotheses(cfg.scenario.schedule.remote_distance_m, cfg.analysis["kappa_past"]).lag(model.kind)
    dec = decode_message(
        signal.t, signal.x, len(msg["bits"]), msg["symbol_period_s"], estimator,
        model.conjectured_visibility, msg.get("start_s", 0.0), lag, truth=msg["bits"],
    )
    return {
        "sent": msg["bits"],
        "decoded": dec.bitstring,
        "bit_error_rate": dec.bit_error_rate,
        "ber_ci95": list(dec.ber_ci) if dec.ber_ci else None,
        "low_confidence_slots": dec.low_confidence,
        "onset_lag_s": lag,
    }
