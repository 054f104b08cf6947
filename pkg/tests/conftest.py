import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dcqe.optics import SignalArmModel, graph_preset  # noqa: E402
from dcqe.scenarios import BiphotonScenario, EmissionPlan, Geometry  # noqa: E402


@pytest.fixture(scope="session")
def kim():
    return graph_preset("kim1999")


@pytest.fixture(scope="session")
def kim_zero():
    return graph_preset("kim1999", zero_lengths=True)


@pytest.fixture(scope="session")
def signal():
    return SignalArmModel()


@pytest.fixture(scope="session")
def centred_signal():
    return SignalArmModel(envelope_center_a_m=0.0, envelope_center_b_m=0.0)


def remote_scenario(distance_m, n, interval_s=1e-4, schedule=None, signal=None, segments=None, name="remote"):
    """Remote eraser that switches to a straight-line (marking) graph on MARK."""
    from dcqe.scenarios import TriggerSchedule

    return BiphotonScenario(
        name=name,
        signal=signal or SignalArmModel(envelope_center_a_m=0.0, envelope_center_b_m=0.0),
        graph=graph_preset("remote_eraser", distance_m=distance_m),
        mark_graph=graph_preset("straightline", distance_m=distance_m),
        geometry=Geometry(),
        emission=EmissionPlan(n, interval_s=None if segments else interval_s, segments=segments),
        schedule=schedule or TriggerSchedule((), distance_m),
    )


@pytest.fixture
def make_remote():
    return remote_scenario


# --- acceptance summary -------------------------------------------------------------
# tests marked ``acceptance(n, title)`` get one PASS/FAIL line each in the summary;
# a test may attach a short measured detail via ``record_property("detail", ...)``

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed:
        reason = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else "error"
        detail = f"{detail}; {reason.splitlines()[0]}" if detail else reason.splitlines()[0]
    status = "PASS" if rep.passed else "FAIL"
    if _ACCEPTANCE.get(number, ("PASS",))[0] != "FAIL":
        _ACCEPTANCE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} [{status}] {title}: {detail}")
