"""Steady push force against setpoint depth and wall stiffness.

Each run approaches the wall with the plate at l_max, steps the setpoint
depth up in increments of at most ``step`` (large single steps destabilise
the contact) and holds the final depth. The measured force is compared with the series-spring prediction
K k_n dp / (K + k_n). Results go to a CSV.
"""

from __future__ import annotations

import argparse
import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from itertools import product
from pathlib import Path

from tiltpush.config import case1_template
import numpy as np

from tiltpush.simulator import PlateCommand, Waypoint, run_scenario


def staged_push(delta_p: float, k_n: float, step: float = 0.2, dwell: float = 4.0, hold: float = 16.0):
    base = case1_template()
    n = max(1, int(np.ceil(delta_p / step - 1e-9)))
    depths = np.linspace(delta_p / n, delta_p, n)
    waypoints = [base.waypoints[0]] + [Waypoint(t=4.0 + dwell * i, delta_p=float(d)) for i, d in enumerate(depths)]
    return replace(
        base,
        name=f"push_{delta_p:g}_{k_n:g}",
        wall=replace(base.wall, k_n=k_n),
        waypoints=tuple(waypoints),
        plate=(PlateCommand(t=0.0, l=base.vehicle.l_max),),
        sim=replace(base.sim, duration=4.0 + dwell * (n - 1) + hold),
    )


def measure(job: tuple[float, float]) -> dict:
    delta_p, k_n = job
    cfg = staged_push(delta_p, k_n)
    result = run_scenario(cfg)
    K = cfg.gains.K[0]
    predicted = K * k_n * delta_p / (K + k_n)
    row = {"delta_p": delta_p, "k_n": k_n, "status": result.status, "predicted": predicted}
    seg = result.segments[-1] if result.segments else None
    if seg is not None and result.ok:
        row.update(force=seg.force_mean, std=seg.force_std, converged=seg.converged,
                   back_sat=seg.max_back_saturation, rel_err=seg.force_mean / predicted - 1.0)
    return row


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta-p", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 1.0, 1.2])
    ap.add_argument("--k-n", type=float, nargs="+", default=[500.0, 1500.0, 5000.0])
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("runs/push_force_sweep.csv"))
    args = ap.parse_args()

    jobs = list(product(args.delta_p, args.k_n))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(measure, jobs))

    fields = ["delta_p", "k_n", "status", "predicted", "force", "std", "converged", "back_sat", "rel_err"]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)

    for r in rows:
        force = f"{r['force']:7.2f} N ({r['rel_err']:+.1%})" if "force" in r else "   --"
        print(f"dp={r['delta_p']:4.2f}  k_n={r['k_n']:6.0f}  {r['status']:<8}  predicted {r['predicted']:6.2f} N  measured {force}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
