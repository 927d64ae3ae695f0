"""Run the staged push (plate shifted), the plate-locked push and the direct push.

Writes each run under ``--out`` and prints a side-by-side comparison of the
0.8 m segment, where the CoM shift should lower back-rotor saturation.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from tiltpush.cli import summary_table, write_run
from tiltpush.config import case1_template, case2_template
from tiltpush.simulator import run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("runs/cases"))
    args = ap.parse_args()

    runs = {
        "shifted": case1_template(),
        "locked": case2_template(),
        "direct": case2_template((1.0,)),
    }
    results = {}
    for name, cfg in runs.items():
        result = run_scenario(cfg)
        write_run(result, cfg, args.out / name)
        results[name] = result
        print(f"== {name} ({cfg.name})")
        print(summary_table(result))
        print()

    segs = {name: next(s for s in results[name].segments if s.delta_p == 0.8) for name in ("shifted", "locked")}
    print("delta_p = 0.8 m     l_end   back_sat   osc_rms     track_rms   force")
    for name, s in segs.items():
        print(f"{name:<18}{s.l_end:6.3f}   {s.max_back_saturation:7.3f}   {s.attitude_osc_rms:.3e}   "
              f"{s.attitude_rms:.3e}   {s.force_mean:6.2f}")


if __name__ == "__main__":
    main()
