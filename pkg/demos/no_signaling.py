"""How much does D0 learn about a remote switch?

A remote screen one light-second away flips between erasing and marking
every second.  Under standard quantum mechanics the D0 positions are
independent of the setting, so the mutual information is consistent with
zero.  Under the FUTURE_HS conjecture the fringes come and go with the
switch and the same estimator reports a large fraction of a bit.
"""

import argparse

import numpy as np

from dcqe.analysis import estimate_mutual_information, ks_two_sample, position_edges
from dcqe.optics import SPEED_OF_LIGHT, SignalArmModel, graph_preset
from dcqe.scenarios import (
    BiphotonScenario, ConjectureModel, EmissionPlan, Geometry, ModelKind, TriggerSchedule, encode_message, run_scenario,
)


def remote(n, schedule):
    d = schedule.remote_distance_m
    return BiphotonScenario(
        "remote", SignalArmModel(envelope_center_a_m=0.0, envelope_center_b_m=0.0),
        graph_preset("remote_eraser", distance_m=d), Geometry(), EmissionPlan(n, interval_s=1e-4),
        schedule, graph_preset("straightline", distance_m=d),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400_000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    n_bits = int(args.n * 1e-4) // 2 * 2
    schedule = TriggerSchedule(encode_message("10" * (n_bits // 2), 1.0).changes, SPEED_OF_LIGHT)
    scen = remote(args.n, schedule)
    edges = position_edges(scen.signal)

    for kind in (ModelKind.QM_BASELINE, ModelKind.FUTURE_HS):
        sig = run_scenario(scen, ConjectureModel(kind), args.seed).signal()
        bins = np.digitize(sig.x, edges[1:-1])
        mi = estimate_mutual_information(sig.setting, bins)
        _, p = ks_two_sample(sig.x[sig.setting == 0], sig.x[sig.setting == 1])
        print(f"{kind.value:12s} MI = {mi.mi_bits:.2e} bits/detection "
              f"(95% CI {mi.ci_low:.1e} to {mi.ci_high:.1e}), KS p = {p:.3g}")


if __name__ == "__main__":
    main()
