"""Minkowski interval bookkeeping and the light-cone audit of a scenario layout."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .optics import SPEED_OF_LIGHT, transfer_coefficients

if TYPE_CHECKING:
    from .scenarios import BiphotonScenario

DEFAULT_EPSILON_S = 0.01e-9


class IntervalKind(str, enum.Enum):
    TIMELIKE_FUTURE = "timelike_future"
    TIMELIKE_PAST = "timelike_past"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"


class Verdict(str, enum.Enum):
    PARADOX_TOPOLOGY = "paradox_topology"
    ON_CONE = "on_cone"
    OUTSIDE_CONE = "outside_cone"


@dataclass(frozen=True)
class SpacetimeEvent:
    t: float
    pos: tuple[float, float, float]
    label: str = ""

    def __post_init__(self):
        pos = tuple(float(p) for p in self.pos)
        if len(pos) != 3 or not all(math.isfinite(v) for v in (self.t, *pos)):
            raise ValueError(f"event {self.label!r}: need finite t and a 3-vector position")
        object.__setattr__(self, "pos", pos)


@dataclass(frozen=True)
class IntervalClass:
    kind: IntervalKind
    squared_interval: float  # s^2 = dt^2 - |dx|^2 / c^2, seconds^2


def squared_interval(reference: SpacetimeEvent, other: SpacetimeEvent) -> float:
    dt = other.t - reference.t
    dist = math.dist(reference.pos, other.pos) / SPEED_OF_LIGHT
    # factored form keeps near-cone values accurate
    return (dt - dist) * (dt + dist)


def classify_interval(
    reference: SpacetimeEvent, other: SpacetimeEvent, epsilon_s: float = DEFAULT_EPSILON_S
) -> IntervalClass:
    """Classify ``other`` relative to ``reference``.

    ``|s| <= epsilon_s`` counts as lightlike; otherwise the sign of ``s^2``
    separates timelike from spacelike and the sign of ``dt`` picks future or
    past.
    """
    if epsilon_s < 0:
        raise ValueError("epsilon_s must be >= 0")
    s2 = squared_interval(reference, other)
    if abs(s2) <= epsilon_s * epsilon_s:
        kind = IntervalKind.LIGHTLIKE
    elif s2 < 0:
        kind = IntervalKind.SPACELIKE
    elif other.t > reference.t:
        kind = IntervalKind.TIMELIKE_FUTURE
    else:
        kind = IntervalKind.TIMELIKE_PAST
    return IntervalClass(kind, s2)


def boost(event: SpacetimeEvent, velocity: Sequence[float]) -> SpacetimeEvent:
    """Lorentz boost of an event into a frame moving at ``velocity`` (m/s)."""
    v = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed >= SPEED_OF_LIGHT:
        raise ValueError("boost speed must be below c")
    pos = np.asarray(event.pos, dtype=float)
    if speed == 0.0:
        return event
    n = v / speed
    gamma = 1.0 / math.sqrt(1.0 - (speed / SPEED_OF_LIGHT) ** 2)
    x_par = float(pos @ n)
    t_new = gamma * (event.t - speed * x_par / SPEED_OF_LIGHT**2)
    x_par_new = gamma * (x_par - speed * event.t)
    pos_new = pos + (x_par_new - x_par) * n
    return SpacetimeEvent(t_new, tuple(pos_new), event.label)


@dataclass
class CausalAuditReport:
    reference: SpacetimeEvent
    events: list[SpacetimeEvent]
    classes: dict[str, IntervalClass]
    verdict: Verdict
    epsilon_s: float = DEFAULT_EPSILON_S
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "epsilon_s": self.epsilon_s,
            "reference": {"label": self.reference.label, "t_s": self.reference.t, "pos_m": list(self.reference.pos)},
            "events": [
                {
                    "label": ev.label,
                    "t_s": ev.t,
                    "pos_m": list(ev.pos),
                    "class": self.classes[ev.label].kind.value,
                    "squared_interval_s2": self.classes[ev.label].squared_interval,
                }
                for ev in self.events
            ],
            "notes": list(self.notes),
        }


def verdict_from_classes(classes: Mapping[str, IntervalClass]) -> Verdict:
    kinds = {cls.kind for cls in classes.values()}
    if IntervalKind.TIMELIKE_FUTURE in kinds:
        return Verdict.PARADOX_TOPOLOGY
    if IntervalKind.LIGHTLIKE in kinds:
        return Verdict.ON_CONE
    return Verdict.OUTSIDE_CONE


def audit_topology(scenario: "BiphotonScenario", epsilon_s: float | None = None) -> CausalAuditReport:
    """Place one emission's detections in spacetime and audit them against D0.

    The emission happens at ``t = 0`` at the source.  D0 fires after
    ``signal_path_m / c``; each idler detector fires after its graph delay.
    Any idler detection inside D0's future light cone means the D0 observer
    could still act on it, which is reported as ``paradox_topology``.
    """
    geometry = scenario.geometry
    eps = geometry.lightlike_epsilon_s if epsilon_s is None else epsilon_s
    reference = SpacetimeEvent(geometry.signal_path_m / SPEED_OF_LIGHT, geometry.d0_pos_m, "D0")

    delays: dict[str, float] = {}
    for graph in scenario.graphs():
        delays.update(transfer_coefficients(graph).delay)

    missing = [det for det in delays if det not in geometry.detector_pos_m]
    if missing:
        raise KeyError(f"scenario geometry has no position for detector(s) {missing}")

    events = [SpacetimeEvent(delays[det], geometry.detector_pos_m[det], det) for det in delays]
    classes = {ev.label: classify_interval(reference, ev, eps) for ev in events}
    return CausalAuditReport(reference, events, classes, verdict_from_classes(classes), eps)
