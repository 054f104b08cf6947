"""Timestamped detection-event generation under QM and the conjecture models.

Every emission produces one D0 (signal) detection and one idler detection.
Under ``QM_BASELINE`` the pair ``(x, k)`` is drawn from the joint density of
the idler graph that is configured at the remote station when the idler gets
there.  The conjecture models instead draw the D0 position from a conjectured
marginal that depends on an *effective* remote setting, read off the trigger
schedule at ``t_D0 + kappa * D / c`` (plus jitter):

* ``FUTURE_HS``  kappa = +1: D0 reacts as soon as the trigger is sent.
* ``PRESENT_HS`` kappa = 0: D0 reacts when the trigger reaches the remote end.
* ``PAST_HS``    kappa = -kappa' < 0: D0 reacts ``kappa' D / c`` later still.
* ``HYPERWAVE``  fringe visibility scaled by ``exp(-tau_n / tau_c)``, with
  ``tau_n`` the time since the previous emission.

Random numbers come from fixed-size emission blocks, each with its own
``SeedSequence(seed, spawn_key=(block,))`` substream, so output does not depend
on how blocks are grouped into parallel chunks.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

from .optics import (
    SPEED_OF_LIGHT,
    PathGraph,
    SignalArmModel,
    joint_density_table,
    transfer_coefficients,
    validate_unitarity,
)

BLOCK_SIZE = 8192
D0 = "D0"


class Setting(str, enum.Enum):
    ERASE = "ERASE"
    MARK = "MARK"

    @property
    def code(self) -> int:
        return 0 if self is Setting.ERASE else 1

    @classmethod
    def from_code(cls, code: int) -> "Setting":
        return cls.ERASE if int(code) == 0 else cls.MARK


class ModelKind(str, enum.Enum):
    QM_BASELINE = "QM_BASELINE"
    FUTURE_HS = "FUTURE_HS"
    PRESENT_HS = "PRESENT_HS"
    PAST_HS = "PAST_HS"
    HYPERWAVE = "HYPERWAVE"


@dataclass(frozen=True)
class TriggerSchedule:
    """Setting changes sent from D0 by a signal travelling at ``c``.

    A change sent at ``t_send`` is in effect at the remote screen from
    ``t_send + remote_distance_m / c`` on.  Before any change the remote
    screen erases which-path information.
    """

    changes: tuple[tuple[float, Setting], ...] = ()
    remote_distance_m: float = 0.0

    def __post_init__(self):
        changes = tuple((float(t), Setting(s)) for t, s in self.changes)
        times = [t for t, _ in changes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trigger send times must be strictly increasing")
        if not self.remote_distance_m >= 0:
            raise ValueError("remote_distance_m must be >= 0")
        object.__setattr__(self, "changes", changes)

    @property
    def light_time_s(self) -> float:
        return self.remote_distance_m / SPEED_OF_LIGHT

    @property
    def send_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.changes], dtype=float)

    @property
    def effective_times(self) -> np.ndarray:
        return self.send_times + self.light_time_s

    def codes_at(self, t) -> np.ndarray:
        """Vectorized :func:`setting_at`, returning 0 (ERASE) / 1 (MARK)."""
        t = np.asarray(t, dtype=float)
        if not self.changes:
            return np.zeros(t.shape, dtype=np.int8)
        codes = np.array([0] + [s.code for _, s in self.changes], dtype=np.int8)
        idx = np.searchsorted(self.effective_times, t, side="right")
        return codes[idx]


def setting_at(schedule: TriggerSchedule, t: float) -> Setting:
    """Setting in effect at the remote screen at lab time ``t``."""
    return Setting.from_code(schedule.codes_at(t))


def encode_message(
    bits: str | Sequence[int],
    symbol_period_s: float,
    start_s: float = 0.0,
    remote_distance_m: float = 0.0,
) -> TriggerSchedule:
    """Schedule that holds MARK during slots carrying a 1 and ERASE otherwise.

    Only actual transitions become changes, so ``"0000"`` gives an empty
    schedule.
    """
    if not symbol_period_s > 0:
        raise ValueError("symbol_period_s must be positive")
    bit_list = [int(b) for b in bits]
    if not bit_list:
        raise ValueError("cannot encode an empty bit string")
    if any(b not in (0, 1) for b in bit_list):
        raise ValueError("bits must be 0 or 1")
    changes = []
    current = 0
    for i, b in enumerate(bit_list):
        if b != current:
            changes.append((start_s + i * symbol_period_s, Setting.MARK if b else Setting.ERASE))
            current = b
    return TriggerSchedule(tuple(changes), remote_distance_m)


@dataclass(frozen=True)
class ConjectureModel:
    kind: ModelKind = ModelKind.QM_BASELINE
    kappa: float | None = None
    conjectured_visibility: float = 1.0
    fringe_phase_rad: float = 0.0
    tau_c_s: float = 10e-6
    jitter_sigma_s: float = 0.0
    # scalar, or piecewise-constant ((t_s, p), ...) indexed by effective time
    marking_probability: float | tuple[tuple[float, float], ...] = 0.0
    signal_speed_mps: float | None = None
    idler_speed_mps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kappa is not None and not -1.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [-1, 1]")
        if not 0.0 <= self.conjectured_visibility <= 1.0:
            raise ValueError("conjectured_visibility must lie in [0, 1]")
        if not self.tau_c_s > 0:
            raise ValueError("tau_c_s must be positive")
        if not self.jitter_sigma_s >= 0:
            raise ValueError("jitter_sigma_s must be >= 0")
        pm = self.marking_probability
        if isinstance(pm, (int, float)):
            values = [float(pm)]
        else:
            pm = tuple((float(t), float(p)) for t, p in pm)
            if not pm:
                raise ValueError("marking_probability curve is empty")
            times = [t for t, _ in pm]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("marking_probability breakpoints must be increasing")
            object.__setattr__(self, "marking_probability", pm)
            values = [p for _, p in pm]
        if not all(0.0 <= p <= 1.0 for p in values):
            raise ValueError("marking_probability must lie in [0, 1]")

    def marking_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        pm = self.marking_probability
        if isinstance(pm, (int, float)):
            return np.full(t.shape, float(pm))
        times = np.array([b for b, _ in pm])
        values = np.array([p for _, p in pm])
        idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, None)
        return values[idx]

    def resolve_kappa(self, signal_path_m: float = 0.0, remote_distance_m: float = 0.0) -> float:
        """Light-time coefficient that places the coupled hypersurface."""
        if self.kappa is not None:
            return float(self.kappa)
        if self.kind is ModelKind.FUTURE_HS:
            return 1.0
        if self.kind is ModelKind.PAST_HS:
            if self.signal_speed_mps and self.idler_speed_mps and remote_distance_m > 0:
                lag = signal_path_m / self.signal_speed_mps - remote_distance_m / self.idler_speed_mps
                kappa_prime = lag * SPEED_OF_LIGHT / remote_distance_m
                if not 0.0 < kappa_prime <= 1.0:
                    raise ValueError(f"arm speeds give kappa' = {kappa_prime:.4g}, outside (0, 1]")
                return -kappa_prime
            return -1.0
        return 0.0


def effective_setting(
    model: ConjectureModel,
    schedule: TriggerSchedule,
    t_signal_detection: float,
    rng: np.random.Generator | None = None,
    kappa: float | None = None,
) -> Setting:
    """Remote setting a D0 detection at ``t_signal_detection`` couples to.

    ``t_eff = t_signal_detection + kappa * D / c + jitter`` with Gaussian
    jitter of width ``model.jitter_sigma_s``.
    """
    if model.kind is ModelKind.QM_BASELINE:
        raise ValueError("QM_BASELINE has no effective setting; use setting_at on the idler arrival")
    k = model.resolve_kappa(remote_distance_m=schedule.remote_distance_m) if kappa is None else kappa
    t_eff = t_signal_detection + k * schedule.light_time_s
    if model.jitter_sigma_s > 0:
        if rng is None:
            raise ValueError("jitter needs an rng")
        t_eff += rng.normal(0.0, model.jitter_sigma_s)
    return setting_at(schedule, t_eff)


@dataclass(frozen=True)
class EmissionPlan:
    """Emission times: uniform ``interval_s``, an explicit ``times_s`` list, or
    ``segments`` of ``(count, interval_s)`` run back to back (repeating)."""

    n_emissions: int = 1000
    interval_s: float | None = 1e-4
    times_s: tuple[float, ...] | None = None
    start_s: float = 0.0
    segments: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        if self.n_emissions < 1:
            raise ValueError("n_emissions must be >= 1")
        if self.segments is not None:
            segs = tuple((int(n), float(dt)) for n, dt in self.segments)
            if not segs or any(n < 1 or not dt > 0 for n, dt in segs):
                raise ValueError("segments need positive counts and intervals")
            object.__setattr__(self, "segments", segs)
        elif self.times_s is not None:
            times = np.asarray(self.times_s, dtype=float)
            if np.any(np.diff(times) <= 0):
                raise ValueError("emission times must be strictly increasing")
            object.__setattr__(self, "times_s", tuple(times.tolist()))
        elif not (self.interval_s and self.interval_s > 0):
            raise ValueError("need a positive interval_s or an explicit times_s list")

    def times(self, n: int | None = None) -> np.ndarray:
        n = self.n_emissions if n is None else n
        if self.times_s is not None:
            if n > len(self.times_s):
                raise ValueError(f"plan lists {len(self.times_s)} emission times, {n} requested")
            return np.asarray(self.times_s[:n])
        if self.segments is not None:
            pattern = np.concatenate([np.full(count, dt) for count, dt in self.segments])
            gaps = np.resize(pattern, n)
            return self.start_s + np.concatenate(([0.0], np.cumsum(gaps[1:])))
        return self.start_s + self.interval_s * np.arange(n, dtype=float)

    def gaps(self, times: np.ndarray) -> np.ndarray:
        """Time since the previous emission; the first emission of a steady
        source sees one interval, of an explicit list an infinite gap."""
        if self.segments is not None:
            first = self.segments[0][1]
        else:
            first = self.interval_s if self.times_s is None else np.inf
        return np.diff(times, prepend=times[0] - first) if len(times) else times


@dataclass(frozen=True)
class Geometry:
    """Lab-frame layout used to time-stamp and audit detections."""

    d0_pos_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    source_pos_m: tuple[float, float, float] = (0.0, 0.0, 0.0)
    signal_path_m: float = 0.0
    detector_pos_m: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)
    lightlike_epsilon_s: float = 0.01e-9


@dataclass(frozen=True)
class BiphotonScenario:
    name: str
    signal: SignalArmModel
    graph: PathGraph
    geometry: Geometry = field(default_factory=Geometry)
    emission: EmissionPlan = field(default_factory=EmissionPlan)
    schedule: TriggerSchedule = field(default_factory=TriggerSchedule)
    mark_graph: PathGraph | None = None

    def graphs(self) -> tuple[PathGraph, ...]:
        return (self.graph,) if self.mark_graph is None else (self.graph, self.mark_graph)

    def graph_for(self, setting: Setting) -> PathGraph:
        if setting is Setting.MARK and self.mark_graph is not None:
            return self.mark_graph
        return self.graph

    @property
    def detector_names(self) -> tuple[str, ...]:
        names = [D0]
        for g in self.graphs():
            names += [d for d in g.detector_ids if d not in names]
        return tuple(names)

    @property
    def signal_delay_s(self) -> float:
        return self.geometry.signal_path_m / SPEED_OF_LIGHT


@dataclass(frozen=True)
class DetectionEvent:
    emission_index: int
    detector: str
    t: float
    x: float | None
    setting_in_effect: Setting


@dataclass
class EventStream:
    """Columnar event store; ``x`` is NaN for idler detections."""

    emission_index: np.ndarray
    detector: np.ndarray  # int codes into detector_names
    t: np.ndarray
    x: np.ndarray
    setting: np.ndarray  # 0 ERASE, 1 MARK
    detector_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.t)

    def code(self, name: str) -> int:
        return self.detector_names.index(name)

    def mask(self, *names: str) -> np.ndarray:
        codes = [self.code(n) for n in names if n in self.detector_names]
        return np.isin(self.detector, codes)

    def select(self, mask: np.ndarray) -> "EventStream":
        return EventStream(
            self.emission_index[mask], self.detector[mask], self.t[mask], self.x[mask],
            self.setting[mask], self.detector_names,
        )

    def signal(self) -> "EventStream":
        return self.select(self.detector == self.code(D0))

    def idler(self) -> "EventStream":
        return self.select(self.detector != self.code(D0))

    def sorted_by_time(self) -> "EventStream":
        order = np.lexsort((self.detector, self.emission_index, self.t))
        return self.select(order)

    def counts(self) -> dict[str, int]:
        tally = np.bincount(self.detector, minlength=len(self.detector_names))
        return {name: int(n) for name, n in zip(self.detector_names, tally) if n}

    def events(self) -> Iterator[DetectionEvent]:
        for i in range(len(self)):
            x = float(self.x[i])
            yield DetectionEvent(
                int(self.emission_index[i]),
                self.detector_names[self.detector[i]],
                float(self.t[i]),
                None if math.isnan(x) else x,
                Setting.from_code(self.setting[i]),
            )

    def equals(self, other: "EventStream") -> bool:
        return (
            self.detector_names == other.detector_names
            and all(
                np.array_equal(getattr(self, f), getattr(other, f), equal_nan=f == "x")
                for f in ("emission_index", "detector", "t", "x", "setting")
            )
        )

    @classmethod
    def concatenate(cls, parts: Sequence["EventStream"]) -> "EventStream":
        names = parts[0].detector_names
        return cls(
            *(np.concatenate([getattr(p, f) for p in parts]) for f in ("emission_index", "detector", "t", "x", "setting")),
            names,
        )


# ---------------------------------------------------------------------------
# sampling


@dataclass
class _SettingTables:
    joint_cdf: np.ndarray  # flattened (cell, detector) cumulative masses
    cond_cdf: np.ndarray  # (cell, detector) cumulative p(k | cell)
    det_codes: np.ndarray
    det_delay: np.ndarray


@dataclass
class _SamplerContext:
    scenario: BiphotonScenario
    model: ConjectureModel
    grid: np.ndarray
    dx: np.ndarray
    tables: dict[int, _SettingTables]
    flat_cdf: np.ndarray  # conjectured marginal without fringes
    fringe_cdf: np.ndarray  # conjectured marginal with full-visibility fringes
    norm_flat: float
    norm_fringe: float
    kappa: float


def _cell_masses(values: np.ndarray, dx: np.ndarray) -> np.ndarray:
    return 0.5 * (values[:-1] + values[1:]) * (dx[:, None] if values.ndim == 2 else dx)


def _cdf(masses: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(masses, axis=-1)
    return cdf / cdf[..., -1:]


def conjectured_components(signal: SignalArmModel, fringe_phase_rad: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Fringe-free and fringe parts ``P`` and ``Q cos(2 phi + psi)`` of the
    conjectured D0 pattern ``P + V Q cos(2 phi + psi)``."""
    ea2 = signal.envelope(x, "A") ** 2
    eb2 = signal.envelope(x, "B") ** 2
    flat = 0.5 * (ea2 + eb2)
    fringe = np.sqrt(ea2 * eb2) * np.cos(2.0 * signal.half_phase(x) + fringe_phase_rad)
    return flat, fringe


def _build_context(scenario: BiphotonScenario, model: ConjectureModel) -> _SamplerContext:
    signal = scenario.signal
    grid = signal.grid
    dx = np.diff(grid)
    names = scenario.detector_names
    tables = {}
    for setting in Setting:
        graph = scenario.graph_for(setting)
        tc = transfer_coefficients(graph)
        report = validate_unitarity(tc)
        if not report.passed:
            raise ValueError(f"idler graph for {setting.value} is not unitary: {report}")
        dens = joint_density_table(signal, tc)
        masses = _cell_masses(dens.values, dx)
        tables[setting.code] = _SettingTables(
            joint_cdf=_cdf(masses.ravel()),
            cond_cdf=_cdf(masses),
            det_codes=np.array([names.index(d) for d in tc.detectors]),
            det_delay=np.array([tc.delay[d] for d in tc.detectors]),
        )
    flat, fringe = conjectured_components(signal, model.fringe_phase_rad, grid)
    flat_m = _cell_masses(flat, dx)
    fringe_m = _cell_masses(flat + fringe, dx)
    kappa = model.resolve_kappa(scenario.geometry.signal_path_m, scenario.schedule.remote_distance_m)
    return _SamplerContext(
        scenario, model, grid, dx, tables,
        _cdf(flat_m), _cdf(fringe_m), float(flat_m.sum()), float(fringe_m.sum()), kappa,
    )


def _sample(ctx: _SamplerContext, indices: np.ndarray, t_emit: np.ndarray, gaps: np.ndarray, rng) -> EventStream:
    n = len(indices)
    scenario, model = ctx.scenario, ctx.model
    n_cells = len(ctx.dx)
    # fixed draw order keeps streams reproducible
    u_cell = rng.random(n)
    u_within = rng.random(n)
    u_det = rng.random(n)
    u_mix = rng.random(n)
    jitter = rng.standard_normal(n) * model.jitter_sigma_s

    t_d0 = t_emit + scenario.signal_delay_s
    arrival = scenario.schedule.codes_at(t_emit + scenario.schedule.light_time_s)

    cells = np.empty(n, dtype=np.int64)
    det_local = np.zeros(n, dtype=np.int64)
    if model.kind is ModelKind.QM_BASELINE:
        d0_setting = arrival
        n_det = {code: len(tab.det_codes) for code, tab in ctx.tables.items()}
        for code, tab in ctx.tables.items():
            sel = arrival == code
            flat_idx = np.minimum(np.searchsorted(tab.joint_cdf, u_cell[sel], side="right"), len(tab.joint_cdf) - 1)
            cells[sel], det_local[sel] = np.divmod(flat_idx, n_det[code])
    else:
        t_eff = t_d0 + ctx.kappa * scenario.schedule.light_time_s + jitter
        d0_setting = scenario.schedule.codes_at(t_eff)
        vis = np.full(n, model.conjectured_visibility)
        if model.kind is ModelKind.HYPERWAVE:
            vis = vis * np.exp(-gaps / model.tau_c_s)
        # P + V Q cos as an exact mixture of the V=0 and V=1 patterns
        w_fringe = vis * ctx.norm_fringe / ((1.0 - vis) * ctx.norm_flat + vis * ctx.norm_fringe)
        p_fringe = np.where(d0_setting == 0, (1.0 - model.marking_at(t_eff)) * w_fringe, 0.0)
        use_fringe = u_mix < p_fringe
        cells[use_fringe] = np.searchsorted(ctx.fringe_cdf, u_cell[use_fringe], side="right")
        cells[~use_fringe] = np.searchsorted(ctx.flat_cdf, u_cell[~use_fringe], side="right")
        np.minimum(cells, n_cells - 1, out=cells)
        for code, tab in ctx.tables.items():
            sel = arrival == code
            rows = tab.cond_cdf[cells[sel]]
            det_local[sel] = np.minimum((rows < u_det[sel, None]).sum(axis=1), rows.shape[1] - 1)

    x = ctx.grid[cells] + u_within * ctx.dx[cells]
    idler_codes = np.empty(n, dtype=np.int64)
    idler_t = np.empty(n)
    for code, tab in ctx.tables.items():
        sel = arrival == code
        idler_codes[sel] = tab.det_codes[det_local[sel]]
        idler_t[sel] = t_emit[sel] + tab.det_delay[det_local[sel]]

    def _interleave(a, b):
        out = np.empty(2 * n, dtype=np.result_type(a, b))
        out[0::2], out[1::2] = a, b
        return out

    return EventStream(
        emission_index=_interleave(indices, indices).astype(np.int64),
        detector=_interleave(np.zeros(n, dtype=np.int64), idler_codes),
        t=_interleave(t_d0, idler_t),
        x=_interleave(x, np.full(n, np.nan)),
        setting=_interleave(d0_setting.astype(np.int8), arrival.astype(np.int8)),
        detector_names=scenario.detector_names,
    )


def sample_emission(
    scenario: BiphotonScenario, model: ConjectureModel, emission_index: int, rng: np.random.Generator
) -> list[DetectionEvent]:
    """Realize a single emission: its D0 event followed by its idler event."""
    times = scenario.emission.times(emission_index + 1)
    gaps = scenario.emission.gaps(times)
    ctx = _build_context(scenario, model)
    idx = np.array([emission_index])
    stream = _sample(ctx, idx, times[idx], gaps[idx], rng)
    return list(stream.events())


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def run_scenario(
    scenario: BiphotonScenario,
    model: ConjectureModel,
    seed: int,
    n: int | None = None,
    n_chunks: int = 1,
    max_workers: int | None = None,
) -> EventStream:
    """Generate the event stream for ``n`` emissions, in emission order.

    Emissions are cut into blocks of ``BLOCK_SIZE`` with one random substream
    per block; ``n_chunks`` groups of blocks are generated concurrently and
    merged in order, so the result is identical for any chunking.
    """
    n = scenario.emission.n_emissions if n is None else int(n)
    if n < 1:
        raise ValueError("need at least one emission")
    if n_chunks < 1:
        raise ValueError("n_chunks must be >= 1")
    times = scenario.emission.times(n)
    gaps = scenario.emission.gaps(times)
    ctx = _build_context(scenario, model)
    n_blocks = -(-n // BLOCK_SIZE)

    def _block(b: int) -> EventStream:
        lo, hi = b * BLOCK_SIZE, min(n, (b + 1) * BLOCK_SIZE)
        return _sample(ctx, np.arange(lo, hi), times[lo:hi], gaps[lo:hi], block_rng(seed, b))

    def _chunk(blocks: Sequence[int]) -> list[EventStream]:
        return [_block(b) for b in blocks]

    groups = [list(g) for g in np.array_split(np.arange(n_blocks), min(n_chunks, n_blocks))]
    if len(groups) == 1:
        parts = _chunk(groups[0])
    else:
        with ThreadPoolExecutor(max_workers=max_workers or len(groups)) as pool:
            parts = [s for chunk in pool.map(_chunk, groups) for s in chunk]
    return EventStream.concatenate(parts)


def with_schedule(scenario: BiphotonScenario, schedule: TriggerSchedule) -> BiphotonScenario:
    return replace(scenario, schedule=schedule)
