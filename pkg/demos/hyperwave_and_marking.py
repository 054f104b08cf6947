"""Two remote-sensing readouts that only exist under the conjecture models.

First, a HYPERWAVE generator whose fringes fade with the time since the
previous emission: grouping D0 hits by that gap exposes the decay and
recovers its time constant.  Second, a partially marking remote screen:
the D0 visibility drop maps back to the marked fraction.
"""

import argparse

import numpy as np

from dcqe.analysis import FringeTemplate, marking_scan, position_edges, tau_dependence_test
from dcqe.optics import SignalArmModel, graph_preset
from dcqe.scenarios import BiphotonScenario, ConjectureModel, EmissionPlan, Geometry, ModelKind, run_scenario


def remote(plan):
    return BiphotonScenario(
        "remote", SignalArmModel(envelope_center_a_m=0.0, envelope_center_b_m=0.0),
        graph_preset("remote_eraser", distance_m=2.5), Geometry(), plan,
        mark_graph=graph_preset("straightline", distance_m=2.5),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    scen = remote(EmissionPlan(300_000, interval_s=None, segments=((1, 1e-6), (1, 1e-5), (1, 1e-4))))
    edges, template = position_edges(scen.signal), FringeTemplate.from_signal(scen.signal)
    tau_all = scen.emission.gaps(scen.emission.times())
    for kind in (ModelKind.QM_BASELINE, ModelKind.HYPERWAVE):
        sig = run_scenario(scen, ConjectureModel(kind, tau_c_s=1e-5), args.seed).signal()
        rep = tau_dependence_test(sig.x, tau_all[sig.emission_index], edges, template)
        vis = ", ".join(f"{b.tau_s * 1e6:g} us: {b.visibility:.3f}" for b in rep.bins)
        print(f"{kind.value:12s} V by gap [{vis}]  rejects={rep.rejects}  tau_c_hat={rep.tau_c_hat * 1e6:.2f} us")

    levels = [0.0, 0.25, 0.5, 0.75, 1.0]
    span = 10.0
    curve = tuple((i * span, p) for i, p in enumerate(levels))
    scen = remote(EmissionPlan(500_000, interval_s=1e-4))
    sig = run_scenario(scen, ConjectureModel(ModelKind.FUTURE_HS, marking_probability=curve), args.seed).signal()
    t_emit = scen.emission.times()[sig.emission_index]
    scan = marking_scan(t_emit, sig.x, np.arange(6) * span, edges, template, 1.0)
    for p, e in zip(levels, scan.estimates):
        print(f"p_mark {p:.2f} -> p_hat {e.p_hat:.3f} [{e.ci_low:.3f}, {e.ci_high:.3f}]")


if __name__ == "__main__":
    main()
