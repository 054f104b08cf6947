import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcqe.optics import SPEED_OF_LIGHT as C
from dcqe.optics import SignalArmModel, graph_preset
from dcqe.scenarios import BiphotonScenario, Geometry
from dcqe.spacetime import (
    IntervalKind,
    SpacetimeEvent,
    Verdict,
    audit_topology,
    boost,
    classify_interval,
    squared_interval,
)

ORIGIN = SpacetimeEvent(0.0, (0.0, 0.0, 0.0), "D0")
EPS = 0.01e-9


def test_one_light_second_is_lightlike():
    other = SpacetimeEvent(1.0, (C, 0.0, 0.0))
    assert classify_interval(ORIGIN, other, EPS).kind is IntervalKind.LIGHTLIKE


def test_folded_idler_is_timelike_future():
    other = SpacetimeEvent(8.34e-9, (0.5, 0.0, 0.0))
    cls = classify_interval(ORIGIN, other, EPS)
    assert cls.kind is IntervalKind.TIMELIKE_FUTURE
    assert cls.squared_interval == pytest.approx(8.34e-9**2 - (0.5 / C) ** 2, rel=1e-12)


def test_unfolded_idler_is_lightlike():
    other = SpacetimeEvent(2.5 / C, (2.5, 0.0, 0.0))
    assert classify_interval(ORIGIN, other, EPS).kind is IntervalKind.LIGHTLIKE


def test_rounded_delay_sits_just_off_the_cone():
    # 8.339 ns falls ~0.1 ps short of 2.5/c; |s| ~ 0.04 ns exceeds the 0.01 ns band
    other = SpacetimeEvent(8.339e-9, (2.5, 0.0, 0.0))
    cls = classify_interval(ORIGIN, other, EPS)
    assert cls.kind is IntervalKind.SPACELIKE
    assert math.sqrt(-cls.squared_interval) == pytest.approx(0.041e-9, abs=0.002e-9)
    assert classify_interval(ORIGIN, other, 0.05e-9).kind is IntervalKind.LIGHTLIKE


@pytest.mark.parametrize(
    "t, x, kind",
    [
        (1.0, 0.5 * C, IntervalKind.TIMELIKE_FUTURE),
        (-1.0, 0.5 * C, IntervalKind.TIMELIKE_PAST),
        (0.5, C, IntervalKind.SPACELIKE),
        (-0.5, C, IntervalKind.SPACELIKE),
        (0.0, 0.0, IntervalKind.LIGHTLIKE),
    ],
)
def test_interval_kinds(t, x, kind):
    assert classify_interval(ORIGIN, SpacetimeEvent(t, (x, 0, 0)), EPS).kind is kind


def test_negative_epsilon_rejected():
    with pytest.raises(ValueError):
        classify_interval(ORIGIN, ORIGIN, -1.0)


def test_event_validation():
    with pytest.raises(ValueError):
        SpacetimeEvent(float("nan"), (0, 0, 0))
    with pytest.raises(ValueError):
        SpacetimeEvent(0.0, (0, 0))


coord = st.floats(-10.0, 10.0, allow_nan=False)
time_s = st.floats(-5e-8, 5e-8, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(t1=time_s, t2=time_s, a=st.tuples(coord, coord, coord), b=st.tuples(coord, coord, coord))
def test_antisymmetry(t1, t2, a, b):
    e1, e2 = SpacetimeEvent(t1, a), SpacetimeEvent(t2, b)
    k12 = classify_interval(e1, e2, EPS).kind
    k21 = classify_interval(e2, e1, EPS).kind
    assert (k12 is IntervalKind.TIMELIKE_FUTURE) == (k21 is IntervalKind.TIMELIKE_PAST)
    assert (k12 is IntervalKind.SPACELIKE) == (k21 is IntervalKind.SPACELIKE)
    assert squared_interval(e1, e2) == pytest.approx(squared_interval(e2, e1), rel=1e-12, abs=1e-30)


@settings(max_examples=300, deadline=None)
@given(
    t1=time_s, t2=time_s,
    a=st.tuples(coord, coord, coord), b=st.tuples(coord, coord, coord),
    speed=st.floats(0.0, 0.9), axis=st.tuples(coord, coord, coord),
)
def test_interval_is_lorentz_scalar(t1, t2, a, b, speed, axis):
    n = np.asarray(axis, dtype=float)
    if np.linalg.norm(n) < 1e-3:
        n = np.array([1.0, 0.0, 0.0])
    v = speed * C * n / np.linalg.norm(n)
    e1, e2 = SpacetimeEvent(t1, a), SpacetimeEvent(t2, b)
    s2 = squared_interval(e1, e2)
    s2b = squared_interval(boost(e1, v), boost(e2, v))
    # relative to the coordinate scale: s^2 itself can cancel to ~0
    scale = max(abs(t1), abs(t2), math.hypot(*a) / C, math.hypot(*b) / C) ** 2
    assert abs(s2b - s2) <= 1e-9 * max(scale, 1e-40)


def test_boost_rejects_superluminal():
    with pytest.raises(ValueError):
        boost(ORIGIN, (C, 0, 0))


# --- audit ---------------------------------------------------------------------


def _scenario(graph, detector_pos, d0=(0.0, 0.0, 0.0), signal_path=0.0):
    return BiphotonScenario(
        "audit", SignalArmModel(), graph,
        Geometry(d0_pos_m=d0, signal_path_m=signal_path, detector_pos_m=detector_pos),
    )


KIM_POS = {"D1": (0.5, 0, 0), "D2": (0, 0.5, 0), "D3": (0.4, 0.3, 0), "D4": (0.3, 0.4, 0)}


def test_kim1999_audit_is_paradox(kim):
    report = audit_topology(_scenario(kim, KIM_POS))
    assert report.verdict is Verdict.PARADOX_TOPOLOGY
    assert report.classes["D1"].kind is IntervalKind.TIMELIKE_FUTURE
    assert report.to_dict()["verdict"] == "paradox_topology"


def test_straightline_audit_is_on_cone():
    g = graph_preset("straightline", distance_m=C)
    report = audit_topology(_scenario(g, {"R0_A": (C, 0, 0), "R0_B": (0, C, 0)}))
    assert report.verdict is Verdict.ON_CONE


def test_mirror_signal_audit_is_outside_cone():
    g = graph_preset("mirror_signal")
    report = audit_topology(_scenario(g, KIM_POS, d0=(-2.0, 0, 0), signal_path=2.5))
    assert report.verdict is Verdict.OUTSIDE_CONE
    assert all(c.kind is IntervalKind.SPACELIKE for c in report.classes.values())


def test_missing_geometry_names_detector(kim):
    pos = dict(KIM_POS)
    del pos["D4"]
    with pytest.raises(KeyError, match="D4"):
        audit_topology(_scenario(kim, pos))


ORDER = {Verdict.PARADOX_TOPOLOGY: 0, Verdict.ON_CONE: 1, Verdict.OUTSIDE_CONE: 2}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=8))
def test_verdict_monotone_in_screen_distance(distances):
    g = graph_preset("straightline", distance_m=2.5)  # delay fixed at 2.5 m / c
    exact = [2.5] + sorted(distances)
    verdicts = [
        audit_topology(_scenario(g, {"R0_A": (r, 0, 0), "R0_B": (0, r, 0)})).verdict for r in sorted(exact)
    ]
    ranks = [ORDER[v] for v in verdicts]
    assert ranks == sorted(ranks)
