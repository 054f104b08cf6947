import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcqe.optics import (
    SPEED_OF_LIGHT,
    GraphError,
    SignalArmModel,
    TransferCoefficients,
    build_path_graph,
    d0_marginal,
    graph_preset,
    joint_density,
    joint_density_table,
    preset_config,
    transfer_coefficients,
    validate_unitarity,
)
from oracles import brute_coefficients, enumerate_paths, random_unitary_config

S2 = 1 / math.sqrt(2)


def _zeroed(config):
    for el in config["elements"]:
        if el["kind"] == "phase_segment":
            el["length_m"] = 0.0
    return config


# --- graph construction -----------------------------------------------------


def test_kim1999_topology(kim):
    tc = transfer_coefficients(kim)
    assert set(kim.detector_ids) == {"D1", "D2", "D3", "D4"}
    assert tc.sources_reaching("D1") == ("A", "B")
    assert tc.sources_reaching("D2") == ("A", "B")
    assert tc.sources_reaching("D3") == ("A",)
    assert tc.sources_reaching("D4") == ("B",)


def test_trivial_identity_graph():
    g = build_path_graph({"elements": [], "sources": {"A": "a", "B": "b"}, "detectors": {"KA": "a", "KB": "b"}})
    tc = transfer_coefficients(g)
    assert tc.coeff[("A", "KA")] == 1 and tc.coeff[("A", "KB")] == 0
    assert tc.coeff[("B", "KB")] == 1
    assert tc.delay == {"KA": 0.0, "KB": 0.0}
    assert validate_unitarity(tc).passed


def test_straightline_preset():
    g = graph_preset("straightline")
    assert set(g.detector_ids) == {"R0_A", "R0_B"}
    tc = transfer_coefficients(g)
    assert tc.sources_reaching("R0_A") == ("A",)
    assert tc.sources_reaching("R0_B") == ("B",)
    report = validate_unitarity(tc)
    assert report.passed
    assert report.column_norms["A"] == pytest.approx(1, abs=1e-15)


def test_cycle_reported_with_element():
    cfg = {
        "elements": [
            {"id": "loop1", "kind": "mirror", "in": ["p1"], "out": ["p2"]},
            {"id": "loop2", "kind": "mirror", "in": ["p2"], "out": ["p1"]},
            {"id": "m", "kind": "mirror", "in": ["a"], "out": ["da"]},
        ],
        "sources": {"A": "a", "B": "b"},
        "detectors": {"DA": "da", "DB": "b"},
    }
    with pytest.raises(GraphError, match="cycle") as err:
        build_path_graph(cfg)
    assert err.value.element_id in {"loop1", "loop2"}


def test_dangling_port_reported():
    cfg = {
        "elements": [{"id": "bs", "kind": "beamsplitter_5050", "in": ["a", "b"], "out": ["o1", "o2"]}],
        "sources": {"A": "a", "B": "b"},
        "detectors": {"D1": "o1"},
    }
    with pytest.raises(GraphError) as err:
        build_path_graph(cfg)
    assert err.value.element_id == "bs"
    assert "o2" in str(err.value)


def test_unreachable_detector_reported():
    cfg = {
        "elements": [
            {"id": "bs", "kind": "beamsplitter_5050", "in": ["a", "b"], "out": ["o1", "o2"]},
            {"id": "orphan", "kind": "mirror", "in": ["vac"], "out": ["o3"]},
        ],
        "sources": {"A": "a", "B": "b"},
        "detectors": {"D1": "o1", "D2": "o2", "D3": "o3"},
        "dark_ports": ["vac"],
    }
    with pytest.raises(GraphError, match="D3|reach"):
        build_path_graph(cfg)


@pytest.mark.parametrize(
    "element, pattern",
    [
        ({"id": "x", "kind": "prism", "in": ["a"], "out": ["da"]}, "kind"),
        ({"id": "x", "kind": "beamsplitter_5050", "in": ["a"], "out": ["da"]}, "port"),
        ({"id": "x", "kind": "phase_segment", "in": ["a"], "out": ["da"], "length_m": -1.0}, "length"),
    ],
)
def test_bad_elements(element, pattern):
    cfg = {"elements": [element], "sources": {"A": "a", "B": "b"}, "detectors": {"DA": "da", "DB": "b"}}
    with pytest.raises(GraphError, match=pattern) as err:
        build_path_graph(cfg)
    assert err.value.element_id == "x"


def test_to_config_round_trip(kim):
    again = build_path_graph(kim.to_config())
    assert again.to_config() == kim.to_config()


# --- transfer coefficients --------------------------------------------------


KIM_ZERO = {
    ("A", "D1"): 0.5j, ("A", "D2"): -0.5, ("A", "D3"): 1j * S2, ("A", "D4"): 0,
    ("B", "D1"): -0.5, ("B", "D2"): 0.5j, ("B", "D3"): 0, ("B", "D4"): 1j * S2,
}


@pytest.mark.parametrize("key", sorted(KIM_ZERO))
def test_kim1999_zero_length_coefficients(kim_zero, key):
    tc = transfer_coefficients(kim_zero)
    assert tc.coeff[key] == pytest.approx(KIM_ZERO[key], abs=1e-15)


def test_coefficients_match_path_enumeration(kim):
    oracle = brute_coefficients(kim.to_config())
    tc = transfer_coefficients(kim)
    for key, value in oracle.items():
        assert tc.coeff[key] == pytest.approx(value, abs=1e-13)


def test_zero_length_oracle_agrees_with_frozen_values():
    oracle = brute_coefficients(_zeroed(preset_config("kim1999")))
    for key, value in KIM_ZERO.items():
        assert oracle[key] == pytest.approx(value, abs=1e-15)


def test_full_wave_segment_is_identity():
    lam = 702e-9
    g = build_path_graph({
        "elements": [{"id": "s", "kind": "phase_segment", "in": ["a"], "out": ["da"], "length_m": lam}],
        "sources": {"A": "a", "B": "b"}, "detectors": {"DA": "da", "DB": "b"}, "wavelength_m": lam,
    })
    tc = transfer_coefficients(g)
    assert tc.coeff[("A", "DA")] == pytest.approx(1.0, abs=1e-15)
    assert tc.delay["DA"] == lam / SPEED_OF_LIGHT


def test_kim1999_delay_is_8_34_ns(kim):
    tc = transfer_coefficients(kim)
    assert tc.delay["D1"] == pytest.approx(2.5 / SPEED_OF_LIGHT, rel=1e-15)
    assert tc.delay["D1"] * 1e9 == pytest.approx(8.34, abs=0.01)


def test_delays_are_summed_segment_lengths(kim):
    routes = enumerate_paths(kim.to_config())
    tc = transfer_coefficients(kim)
    for (_, det), paths in routes.items():
        assert tc.delay[det] == max(length for _, length in paths) / SPEED_OF_LIGHT


def test_unequal_paths_warn_and_take_longest():
    cfg = {
        "elements": [
            {"id": "bs1", "kind": "beamsplitter_5050", "in": ["a", "b"], "out": ["u", "v"]},
            {"id": "short", "kind": "phase_segment", "in": ["u"], "out": ["u2"], "length_m": 1.0},
            {"id": "long", "kind": "phase_segment", "in": ["v"], "out": ["v2"], "length_m": 2.0},
            {"id": "bs2", "kind": "beamsplitter_5050", "in": ["u2", "v2"], "out": ["k1", "k2"]},
        ],
        "sources": {"A": "a", "B": "b"},
        "detectors": {"K1": "k1", "K2": "k2"},
    }
    with pytest.warns(RuntimeWarning, match="different length"):
        tc = transfer_coefficients(build_path_graph(cfg))
    assert tc.delay["K1"] == 2.0 / SPEED_OF_LIGHT


# --- unitarity ----------------------------------------------------------------


def test_kim1999_unitarity(kim_zero):
    report = validate_unitarity(transfer_coefficients(kim_zero))
    assert report.passed
    assert report.column_norms["A"] == pytest.approx(1, abs=1e-15)
    assert report.column_norms["B"] == pytest.approx(1, abs=1e-15)
    assert abs(report.inner_product) <= 1e-15


def test_lossy_graph_fails_with_quarter_residual(kim_zero):
    tc = transfer_coefficients(kim_zero)
    dets = tuple(d for d in tc.detectors if d != "D2")
    lossy = TransferCoefficients({k: v for k, v in tc.coeff.items() if k[1] != "D2"}, tc.delay, dets)
    report = validate_unitarity(lossy)
    assert not report.passed
    assert report.column_norms["A"] == pytest.approx(0.75, abs=1e-15)
    assert report.norm_residuals["A"] == pytest.approx(0.25, abs=1e-15)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_ops=st.integers(1, 14))
def test_random_graphs_are_unitary_and_signal_free(seed, n_ops):
    cfg = random_unitary_config(np.random.default_rng(seed), n_ops)
    g = build_path_graph(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tc = transfer_coefficients(g)
    assert validate_unitarity(tc).passed
    oracle = brute_coefficients(cfg)
    for key, value in oracle.items():
        assert tc.coeff[key] == pytest.approx(value, abs=1e-12)

    signal = SignalArmModel(relative_source_phase_rad=seed % 7 * 0.3)
    x = signal.grid
    reference = d0_marginal(signal, transfer_coefficients(graph_preset("straightline")), x)
    assert np.max(np.abs(d0_marginal(signal, tc, x) - reference)) <= 1e-12 * reference.max()


# --- densities ---------------------------------------------------------------


def test_d1_d2_antiphased_fringes(kim_zero, centred_signal):
    s = centred_signal
    tc = transfer_coefficients(kim_zero)
    x = s.grid
    e2 = s.envelope(x, "A") ** 2
    two_phi = 2 * s.half_phase(x)
    d1, d2 = joint_density(s, tc, x, "D1"), joint_density(s, tc, x, "D2")
    # ratio to the analytic shape must be a constant normalization
    r1 = d1 / (e2 * (1 + np.sin(two_phi)) + 1e-300)
    r2 = d2 / (e2 * (1 - np.sin(two_phi)) + 1e-300)
    ok1 = e2 * (1 + np.sin(two_phi)) > 1e-6
    ok2 = e2 * (1 - np.sin(two_phi)) > 1e-6
    assert np.ptp(r1[ok1]) <= 1e-9 * r1[ok1].mean()
    assert np.ptp(r2[ok2]) <= 1e-9 * r2[ok2].mean()
    assert r1[ok1].mean() == pytest.approx(r2[ok2].mean(), rel=1e-12)


def test_d3_is_single_unfringed_lobe(kim_zero, signal):
    tc = transfer_coefficients(kim_zero)
    x = signal.grid
    d3 = joint_density(signal, tc, x, "D3")
    ratio = d3 / signal.envelope(x, "A") ** 2
    assert np.ptp(ratio) <= 1e-12 * ratio.max()
    assert x[np.argmax(d3)] == pytest.approx(signal.envelope_center_a_m, abs=np.diff(x)[0])


def test_symmetric_point_equal_d1_d2(kim_zero, centred_signal):
    tc = transfer_coefficients(kim_zero)
    assert joint_density(centred_signal, tc, 0.0, "D1") == pytest.approx(
        joint_density(centred_signal, tc, 0.0, "D2"), rel=1e-14)


def test_unknown_detector(kim, signal):
    with pytest.raises(KeyError, match="D9"):
        joint_density(signal, transfer_coefficients(kim), 0.0, "D9")


def test_normalization(kim, signal):
    table = joint_density_table(signal, transfer_coefficients(kim))
    assert table.total() == pytest.approx(1.0, abs=1e-6)
    assert np.all(table.values >= 0)


def test_pi_shift_of_d1_d2_phase(kim, centred_signal):
    # fit each density as a + b cos(2 phi) + c sin(2 phi)
    tc = transfer_coefficients(kim)
    s = centred_signal
    x = np.linspace(-6 * s.envelope_sigma_m, 6 * s.envelope_sigma_m, 20001)
    k = 2 * s.half_phase(x)
    design = np.stack([np.ones_like(k), np.cos(k), np.sin(k)], axis=1)
    phases = []
    for det in ("D1", "D2"):
        d = joint_density(s, tc, x, det) / s.envelope(x, "A") ** 2
        _, cc, cs = np.linalg.lstsq(design, d, rcond=None)[0]
        phases.append(math.atan2(-cs, cc))
    diff = abs(math.remainder(phases[0] - phases[1], 2 * math.pi))
    assert diff == pytest.approx(math.pi, abs=1e-9)


def test_marginal_invariance_presets(signal):
    x = signal.grid
    m_kim = d0_marginal(signal, transfer_coefficients(graph_preset("kim1999")), x)
    m_line = d0_marginal(signal, transfer_coefficients(graph_preset("straightline")), x)
    assert np.max(np.abs(m_kim - m_line)) <= 1e-12 * m_kim.max()


def test_marginal_shapes(kim, signal, centred_signal):
    tc = transfer_coefficients(kim)
    x = centred_signal.grid
    m = d0_marginal(centred_signal, tc, x)
    e2 = centred_signal.envelope(x, "A") ** 2
    assert np.ptp(m / e2) <= 1e-12 * (m / e2).max()
    x = signal.grid
    m = d0_marginal(signal, tc, x)
    lobes = 0.5 * (signal.envelope(x, "A") ** 2 + signal.envelope(x, "B") ** 2)
    assert np.ptp(m / lobes) <= 1e-12 * (m / lobes).max()


def test_signal_model_validation():
    with pytest.raises(ValueError):
        SignalArmModel(envelope_sigma_m=0.0)
    s = SignalArmModel()
    assert s.fringe_period_m == pytest.approx(702e-9 * 0.085 / 0.3e-3)
    assert len(s.grid) == 2048
    assert s.grid[-1] - s.grid[0] == pytest.approx(12 * s.envelope_sigma_m)
