"""Where does each idler detection sit relative to the D0 light cone?

Runs the causal audit on the three geometry presets: the folded table-top
layout (idlers detected inside the future light cone of D0), the straight
remote line (on the cone), and the mirrored signal arm (outside it).
"""

from dcqe.cli import load_preset
from dcqe.spacetime import audit_topology


def main():
    for name in ("kim1999_full", "straightline_remote", "mirror_signal"):
        report = audit_topology(load_preset(name).scenario)
        print(f"{name:20s} {report.verdict.value}")
        for det, cls in sorted(report.classes.items()):
            print(f"    {det:8s} {cls.kind.value:16s} s^2 = {cls.squared_interval:+.3e} s^2")


if __name__ == "__main__":
    main()
