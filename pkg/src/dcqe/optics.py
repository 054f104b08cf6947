"""Idler-arm path graphs, transfer coefficients and joint detection densities.

The idler arm is described as a small directed acyclic network of optical
elements joined by named ports.  Every source (idler born in region ``A`` or
``B`` of the crystal) is pushed through the network; the complex amplitude that
reaches a detector port is the sum over all simple paths of the product of the
element factors along that path.

Conventions
-----------
* 50/50 beamsplitter: ``[[1, i], [i, 1]] / sqrt(2)`` acting on
  ``(in0, in1) -> (out0, out1)``, i.e. transmission ``in0 -> out0`` carries
  ``1/sqrt(2)`` and reflection ``in0 -> out1`` carries ``i/sqrt(2)``.
* Mirror: factor ``i``.
* Phase segment of length ``L``: factor ``exp(2 pi i L / wavelength)`` and a
  propagation delay ``L / c``.

Any other unitary convention only changes global phases per detector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

__all__ = [
    "SPEED_OF_LIGHT",
    "Amplitude",
    "OpticalElement",
    "PathGraph",
    "GraphError",
    "SignalArmModel",
    "TransferCoefficients",
    "UnitarityReport",
    "JointDensity",
    "build_path_graph",
    "graph_preset",
    "GRAPH_PRESETS",
    "transfer_coefficients",
    "validate_unitarity",
    "joint_density",
    "joint_density_table",
    "d0_marginal",
]

SOURCES = ("A", "B")
ELEMENT_KINDS = ("beamsplitter_5050", "mirror", "phase_segment")

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_BEAMSPLITTER = np.array([[1.0, 1j], [1j, 1.0]]) * _SQRT_HALF


class GraphError(ValueError):
    """Invalid path graph; ``element_id`` names the offending element or port."""

    def __init__(self, message: str, element_id: str | None = None):
        super().__init__(message)
        self.element_id = element_id


@dataclass(frozen=True)
class Amplitude:
    re: float
    im: float

    @classmethod
    def from_complex(cls, z: complex) -> "Amplitude":
        return cls(float(z.real), float(z.imag))

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    @property
    def probability(self) -> float:
        return self.re * self.re + self.im * self.im


@dataclass(frozen=True)
class OpticalElement:
    id: str
    kind: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    length_m: float = 0.0

    def factor_matrix(self, wavelength_m: float) -> np.ndarray:
        """Matrix mapping input amplitudes to output amplitudes."""
        if self.kind == "beamsplitter_5050":
            return _BEAMSPLITTER
        if self.kind == "mirror":
            return np.array([[1j]])
        # fmod(L, lambda) is exact; dividing first would cost ~1e-9 rad per metre
        frac = math.fmod(self.length_m, wavelength_m) / wavelength_m
        return np.array([[np.exp(2j * math.pi * frac)]])


@dataclass(frozen=True)
class PathGraph:
    elements: tuple[OpticalElement, ...]
    sources: Mapping[str, str]
    detectors: Mapping[str, str]
    wavelength_m: float
    order: tuple[int, ...] = field(default=(), compare=False)
    dark_ports: tuple[str, ...] = ()

    @property
    def detector_ids(self) -> tuple[str, ...]:
        return tuple(self.detectors)

    def to_config(self) -> dict:
        """Declarative form accepted by :func:`build_path_graph`."""
        elements = []
        for el in self.elements:
            item = {"id": el.id, "kind": el.kind, "in": list(el.inputs), "out": list(el.outputs)}
            if el.kind == "phase_segment":
                item["length_m"] = el.length_m
            elements.append(item)
        return {
            "elements": elements,
            "sources": dict(self.sources),
            "detectors": dict(self.detectors),
            "dark_ports": list(self.dark_ports),
            "wavelength_m": self.wavelength_m,
        }


_PORT_COUNTS = {"beamsplitter_5050": (2, 2), "mirror": (1, 1), "phase_segment": (1, 1)}


def build_path_graph(config: Mapping) -> PathGraph:
    """Validate a declarative element list and return a :class:`PathGraph`.

    ``config`` holds ``elements`` (each with ``id``, ``kind``, ``in``, ``out``
    and ``length_m`` for phase segments), ``sources`` (``{"A": port, "B":
    port}``), ``detectors`` (``{detector_id: port}``), ``wavelength_m`` and
    optionally ``dark_ports``: unused beamsplitter inputs fed by vacuum.

    Raises
    ------
    GraphError
        On malformed elements, dangling or doubly-used ports, cycles, or a
        detector that no source reaches.
    """
    wavelength = float(config.get("wavelength_m", 702e-9))
    if not wavelength > 0:
        raise GraphError("wavelength_m must be positive", "wavelength_m")

    elements: list[OpticalElement] = []
    seen_ids: set[str] = set()
    for raw in config.get("elements", ()):
        el_id = str(raw.get("id", ""))
        if not el_id or el_id in seen_ids:
            raise GraphError(f"element id {el_id!r} missing or duplicated", el_id or None)
        seen_ids.add(el_id)
        kind = raw.get("kind")
        if kind not in _PORT_COUNTS:
            raise GraphError(f"element {el_id!r}: unknown kind {kind!r}", el_id)
        ins = tuple(str(p) for p in raw.get("in", ()))
        outs = tuple(str(p) for p in raw.get("out", ()))
        if (len(ins), len(outs)) != _PORT_COUNTS[kind]:
            n_in, n_out = _PORT_COUNTS[kind]
            raise GraphError(
                f"element {el_id!r}: {kind} needs {n_in} input and {n_out} output ports", el_id
            )
        length = float(raw.get("length_m", 0.0))
        if kind != "phase_segment" and length != 0.0:
            raise GraphError(f"element {el_id!r}: only phase_segment carries length_m", el_id)
        if not (length >= 0.0 and math.isfinite(length)):
            raise GraphError(f"element {el_id!r}: length_m must be finite and >= 0", el_id)
        elements.append(OpticalElement(el_id, kind, ins, outs, length))

    sources = {str(k): str(v) for k, v in dict(config.get("sources", {})).items()}
    if set(sources) != set(SOURCES):
        raise GraphError("sources must name exactly the regions A and B", "sources")
    detectors = {str(k): str(v) for k, v in dict(config.get("detectors", {})).items()}
    if not detectors:
        raise GraphError("graph has no detectors", "detectors")

    # port -> producer / consumer
    producer: dict[str, str] = {}
    consumer: dict[str, str] = {}

    def _produce(port: str, owner: str) -> None:
        if port in producer:
            raise GraphError(f"port {port!r} driven by both {producer[port]!r} and {owner!r}", owner)
        producer[port] = owner

    def _consume(port: str, owner: str) -> None:
        if port in consumer:
            raise GraphError(f"port {port!r} read by both {consumer[port]!r} and {owner!r}", owner)
        consumer[port] = owner

    for name, port in sources.items():
        _produce(port, f"source:{name}")
    dark_ports = tuple(str(p) for p in config.get("dark_ports", ()))
    for port in dark_ports:
        _produce(port, "vacuum")
    for el in elements:
        for p in el.outputs:
            _produce(p, el.id)
        for p in el.inputs:
            _consume(p, el.id)
    for det, port in detectors.items():
        _consume(port, f"detector:{det}")

    for port, owner in consumer.items():
        if port not in producer:
            raise GraphError(f"dangling port {port!r}: read by {owner!r} but never driven", owner)
    for port, owner in producer.items():
        if port not in consumer:
            raise GraphError(f"dangling port {port!r}: driven by {owner!r} but never read", owner)

    # Kahn topological sort over elements
    index = {el.id: i for i, el in enumerate(elements)}
    indegree = [0] * len(elements)
    children: list[list[int]] = [[] for _ in elements]
    for i, el in enumerate(elements):
        for p in el.inputs:
            src = producer[p]
            if src in index:
                indegree[i] += 1
                children[index[src]].append(i)
    ready = [i for i, d in enumerate(indegree) if d == 0]
    order: list[int] = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in children[i]:
            indegree[j] -= 1
            if indegree[j] == 0:
                ready.append(j)
    if len(order) != len(elements):
        stuck = next(el.id for i, el in enumerate(elements) if indegree[i] > 0)
        raise GraphError(f"cycle detected through element {stuck!r}", stuck)

    graph = PathGraph(tuple(elements), sources, detectors, wavelength, tuple(order), dark_ports)
    reach = _reachability(graph, producer)
    for det, port in detectors.items():
        if not reach.get(port):
            raise GraphError(f"detector {det!r} is unreachable from any source", f"detector:{det}")
    return graph


def _reachability(graph: PathGraph, producer: Mapping[str, str]) -> dict[str, set[str]]:
    reach: dict[str, set[str]] = {port: {name} for name, port in graph.sources.items()}
    for i in graph.order:
        el = graph.elements[i]
        feeding: set[str] = set()
        for p in el.inputs:
            feeding |= reach.get(p, set())
        for p in el.outputs:
            reach[p] = set(feeding)
    return reach


@dataclass(frozen=True)
class TransferCoefficients:
    coeff: Mapping[tuple[str, str], complex]
    delay: Mapping[str, float]
    detectors: tuple[str, ...]

    def column(self, source: str) -> np.ndarray:
        return np.array([self.coeff[(source, k)] for k in self.detectors], dtype=complex)

    def amplitude(self, source: str, detector: str) -> Amplitude:
        return Amplitude.from_complex(self.coeff[(source, detector)])

    def sources_reaching(self, detector: str, tol: float = 1e-15) -> tuple[str, ...]:
        return tuple(r for r in SOURCES if abs(self.coeff[(r, detector)]) > tol)


def transfer_coefficients(graph: PathGraph) -> TransferCoefficients:
    """Sum element factors over every source-to-detector path.

    Amplitudes are pushed through the elements in topological order, which is
    the same as summing the product of factors over each simple path.  The
    delay to a detector is its longest path length over ``c``; if a detector
    is reached by paths of different length a ``RuntimeWarning`` is issued.
    """
    coeff: dict[tuple[str, str], complex] = {}
    longest: dict[str, float] = {}
    shortest: dict[str, float] = {}
    for src in SOURCES:
        amp: dict[str, complex] = {graph.sources[src]: 1.0 + 0j}
        lo: dict[str, float] = {graph.sources[src]: 0.0}
        hi: dict[str, float] = {graph.sources[src]: 0.0}
        for i in graph.order:
            el = graph.elements[i]
            if not any(p in amp for p in el.inputs):
                continue
            vin = np.array([amp.get(p, 0j) for p in el.inputs])
            vout = el.factor_matrix(graph.wavelength_m) @ vin
            reached = [p for p in el.inputs if p in lo]
            in_lo = min(lo[p] for p in reached)
            in_hi = max(hi[p] for p in reached)
            for p, a in zip(el.outputs, vout):
                amp[p] = complex(a)
                lo[p] = in_lo + el.length_m
                hi[p] = in_hi + el.length_m
        for det, port in graph.detectors.items():
            coeff[(src, det)] = amp.get(port, 0j)
            if port in lo:
                longest[det] = max(longest.get(det, -math.inf), hi[port])
                shortest[det] = min(shortest.get(det, math.inf), lo[port])

    delay = {}
    for det in graph.detectors:
        if shortest[det] != longest[det]:
            warnings.warn(
                f"detector {det!r} is reached by paths of different length "
                f"({shortest[det]} m .. {longest[det]} m); using the longest",
                RuntimeWarning,
                stacklevel=2,
            )
        delay[det] = longest[det] / SPEED_OF_LIGHT
    return TransferCoefficients(coeff, delay, graph.detector_ids)


@dataclass(frozen=True)
class UnitarityReport:
    column_norms: Mapping[str, float]
    inner_product: complex
    tolerance: float = 1e-12

    @property
    def norm_residuals(self) -> dict[str, float]:
        return {r: abs(1.0 - n) for r, n in self.column_norms.items()}

    @property
    def passed(self) -> bool:
        return (
            all(res <= self.tolerance for res in self.norm_residuals.values())
            and abs(self.inner_product) <= self.tolerance
        )

    def __bool__(self) -> bool:
        return self.passed


def validate_unitarity(tc: TransferCoefficients, tolerance: float = 1e-12) -> UnitarityReport:
    """Column norms and A/B overlap of the transfer matrix.

    Never raises; inspect ``passed`` and the residuals.
    """
    col_a, col_b = tc.column("A"), tc.column("B")
    norms = {"A": float(np.sum(np.abs(col_a) ** 2)), "B": float(np.sum(np.abs(col_b) ** 2))}
    inner = complex(np.sum(col_a * np.conj(col_b)))
    return UnitarityReport(norms, inner, tolerance)


@dataclass(frozen=True)
class SignalArmModel:
    """Double-slit far-field model of the signal photon at D0.

    Each region ``r`` contributes ``G((x - x_r)/sigma) * exp(i s_r pi d x /
    (lambda L0))`` with ``s_A = +1``, ``s_B = -1`` and ``G`` a unit-peak
    Gaussian, so the A/B cross term oscillates with period ``lambda L0 / d``.
    """

    slit_separation_m: float = 0.30e-3
    screen_distance_m: float = 0.085
    envelope_sigma_m: float = 0.12e-3
    envelope_center_a_m: float = -0.15e-3
    envelope_center_b_m: float = 0.15e-3
    relative_source_phase_rad: float = 0.0
    wavelength_m: float = 702e-9
    grid_points: int = 2048
    grid_half_width_sigmas: float = 6.0

    def __post_init__(self):
        for name in ("slit_separation_m", "screen_distance_m", "envelope_sigma_m", "wavelength_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_points < 16:
            raise ValueError("grid_points must be at least 16")

    @property
    def fringe_period_m(self) -> float:
        return self.wavelength_m * self.screen_distance_m / self.slit_separation_m

    @property
    def grid_center_m(self) -> float:
        return 0.5 * (self.envelope_center_a_m + self.envelope_center_b_m)

    @property
    def grid(self) -> np.ndarray:
        half = self.grid_half_width_sigmas * self.envelope_sigma_m
        c0 = self.grid_center_m
        return np.linspace(c0 - half, c0 + half, self.grid_points)

    def half_phase(self, x) -> np.ndarray:
        """``phi(x) = pi d x / (lambda L0)``; fringes go as ``2 phi``."""
        return np.pi * self.slit_separation_m * np.asarray(x, dtype=float) / (
            self.wavelength_m * self.screen_distance_m
        )

    def envelope(self, x, source: str) -> np.ndarray:
        center = self.envelope_center_a_m if source == "A" else self.envelope_center_b_m
        u = (np.asarray(x, dtype=float) - center) / self.envelope_sigma_m
        return np.exp(-0.5 * u * u)

    def amplitude(self, x, source: str) -> np.ndarray:
        sign = 1.0 if source == "A" else -1.0
        amp = self.envelope(x, source) * np.exp(1j * sign * self.half_phase(x))
        if source == "B":
            amp = amp * np.exp(1j * self.relative_source_phase_rad)
        return amp


@dataclass(frozen=True)
class JointDensity:
    """Normalized densities on the signal-arm grid.

    ``values[i, j]`` is the probability density (per meter) of a D0 hit at
    ``grid[i]`` jointly with an idler click in ``detectors[j]``.
    """

    grid: np.ndarray
    detectors: tuple[str, ...]
    values: np.ndarray

    def __call__(self, k: str) -> np.ndarray:
        return self.values[:, self.detectors.index(k)]

    @property
    def marginal(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def total(self) -> float:
        return float(np.trapezoid(self.marginal, self.grid))


def _intensity(signal: SignalArmModel, tc: TransferCoefficients, x) -> np.ndarray:
    """Unnormalized ``|f_A g_Ak + e^{i delta} f_B g_Bk|^2``, shape (len(x), n_det)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fa = signal.amplitude(x, "A")[:, None]
    fb = signal.amplitude(x, "B")[:, None]
    amp = fa * tc.column("A")[None, :] + fb * tc.column("B")[None, :]
    return amp.real**2 + amp.imag**2


def _normalization(signal: SignalArmModel, tc: TransferCoefficients) -> float:
    grid = signal.grid
    return float(np.trapezoid(_intensity(signal, tc, grid).sum(axis=1), grid))


def joint_density(signal: SignalArmModel, tc: TransferCoefficients, x, k: str) -> np.ndarray:
    """Joint density of a D0 hit at ``x`` and an idler click at detector ``k``.

    Normalized so that the integral over the signal grid summed over all
    detectors is one.
    """
    if k not in tc.detectors:
        raise KeyError(f"unknown detector id {k!r}; graph has {list(tc.detectors)}")
    j = tc.detectors.index(k)
    values = _intensity(signal, tc, x)[:, j] / _normalization(signal, tc)
    return values if np.ndim(x) else float(values[0])


def joint_density_table(signal: SignalArmModel, tc: TransferCoefficients) -> JointDensity:
    grid = signal.grid
    inten = _intensity(signal, tc, grid)
    norm = float(np.trapezoid(inten.sum(axis=1), grid))
    return JointDensity(grid, tc.detectors, inten / norm)


def d0_marginal(signal: SignalArmModel, tc: TransferCoefficients, x) -> np.ndarray:
    """D0 density summed over idler outcomes.

    For a unitary idler graph this is ``(|f_A|^2 + |f_B|^2)`` up to
    normalization, whatever the graph: the cross term cancels by column
    orthogonality.
    """
    values = _intensity(signal, tc, x).sum(axis=1) / _normalization(signal, tc)
    return values if np.ndim(x) else float(values[0])


# ---------------------------------------------------------------------------
# presets


def _segment(el_id: str, port_in: str, port_out: str, length_m: float) -> dict:
    return {"id": el_id, "kind": "phase_segment", "in": [port_in], "out": [port_out], "length_m": length_m}


def _kim1999_config(
    wavelength_m: float = 702e-9,
    source_leg_m: float = 0.1,
    mirror_legs_m: tuple[float, float] = (1.0, 1.0),
    eraser_leg_m: float = 0.4,
    which_path_leg_m: float = 1.4,
) -> dict:
    # A: BSA reflects to D3, transmits via MA to BS; B mirrors it via BSB/MB/D4.
    # Arms are symmetric so A and B reach D1/D2 over equal lengths.
    m1, m2 = mirror_legs_m
    elements = []
    for r, wp in (("A", "D3"), ("B", "D4")):
        elements += [
            _segment(f"seg_{r}0", f"src_{r}", f"bs{r}_in", source_leg_m),
            {"id": f"BS{r}", "kind": "beamsplitter_5050",
             "in": [f"bs{r}_in", f"bs{r}_vac"] if r == "A" else [f"bs{r}_vac", f"bs{r}_in"],
             "out": [f"bs{r}_t", f"bs{r}_r"] if r == "A" else [f"bs{r}_r", f"bs{r}_t"]},
            _segment(f"seg_{r}1", f"bs{r}_t", f"m{r}_in", m1),
            {"id": f"M{r}", "kind": "mirror", "in": [f"m{r}_in"], "out": [f"m{r}_out"]},
            _segment(f"seg_{r}2", f"m{r}_out", f"bs_in_{r}", m2),
            _segment(f"seg_{r}3", f"bs{r}_r", f"port_{wp}", which_path_leg_m),
        ]
    elements += [
        {"id": "BS", "kind": "beamsplitter_5050", "in": ["bs_in_A", "bs_in_B"], "out": ["bs_o0", "bs_o1"]},
        _segment("seg_D1", "bs_o0", "port_D1", eraser_leg_m),
        _segment("seg_D2", "bs_o1", "port_D2", eraser_leg_m),
    ]
    return {
        "elements": elements,
        "sources": {"A": "src_A", "B": "src_B"},
        "detectors": {"D1": "port_D1", "D2": "port_D2", "D3": "port_D3", "D4": "port_D4"},
        "dark_ports": ["bsA_vac", "bsB_vac"],
        "wavelength_m": wavelength_m,
    }


def _straightline_config(distance_m: float = 2.5, wavelength_m: float = 702e-9) -> dict:
    return {
        "elements": [
            _segment("free_A", "src_A", "port_R0_A", distance_m),
            _segment("free_B", "src_B", "port_R0_B", distance_m),
        ],
        "sources": {"A": "src_A", "B": "src_B"},
        "detectors": {"R0_A": "port_R0_A", "R0_B": "port_R0_B"},
        "wavelength_m": wavelength_m,
    }


def _remote_eraser_config(distance_m: float = 2.5, wavelength_m: float = 702e-9) -> dict:
    return {
        "elements": [
            _segment("free_A", "src_A", "bs_A", distance_m),
            _segment("free_B", "src_B", "bs_B", distance_m),
            {"id": "BS_remote", "kind": "beamsplitter_5050", "in": ["bs_A", "bs_B"], "out": ["port_Rp", "port_Rm"]},
        ],
        "sources": {"A": "src_A", "B": "src_B"},
        "detectors": {"R_plus": "port_Rp", "R_minus": "port_Rm"},
        "wavelength_m": wavelength_m,
    }


GRAPH_PRESETS = {
    "kim1999": _kim1999_config,
    # same idler wiring; the extra signal-side mirror lives in the scenario geometry
    "mirror_signal": _kim1999_config,
    "straightline": _straightline_config,
    "remote_eraser": _remote_eraser_config,
}


def graph_preset(name: str, zero_lengths: bool = False, **params) -> PathGraph:
    """Build a named preset graph.

    ``zero_lengths`` sets every phase segment to zero length, which is handy for
    checking the bare element factors.
    """
    try:
        factory = GRAPH_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown graph preset {name!r}; known: {sorted(GRAPH_PRESETS)}") from None
    config = factory(**params)
    if zero_lengths:
        for el in config["elements"]:
            if el["kind"] == "phase_segment":
                el["length_m"] = 0.0
    return build_path_graph(config)


def preset_config(name: str, **params) -> dict:
    return GRAPH_PRESETS[name](**params)
