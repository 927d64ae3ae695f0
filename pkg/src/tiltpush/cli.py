"""Command-line front end.

    tiltpush run scenario.toml --out runs/a --set vehicle.m=3.2
    tiltpush sweep scenario.toml --grid waypoints.1.delta_p=0.4,0.6,0.8 --out runs/sweep
    tiltpush validate scenario.toml
    tiltpush case1 --out runs/case1
    tiltpush case2 --out runs/case2

Exit codes: 0 success, 2 config error, 3 instability, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .config import (
    TEMPLATES,
    apply_overrides,
    case2_template,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
    loads_raw,
    read_config_text,
)
from .simulator import ConfigError, RunResult, ScenarioConfig, run_scenario


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_IO = 4

# Direct push with the plate held at l=0, run after the staged case2 sequence.
CASE2_DIRECT_DELTA_P = 1.0


class IOFailure(OSError):
    pass


def _with_seed(cfg: ScenarioConfig, seed: int | None) -> ScenarioConfig:
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=seed))


def _template(name: str, overrides: Sequence[str], seed: int | None) -> ScenarioConfig:
    cfg = TEMPLATES[name]()
    if overrides:
        cfg = config_from_dict(apply_overrides(config_to_dict(cfg), overrides))
    return _with_seed(cfg, seed)


def write_run(result: RunResult, cfg: ScenarioConfig, out: Path) -> None:
    """Write ``config.toml``, ``telemetry.csv`` and ``summary.json`` into ``out``."""
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(dump_config(cfg), encoding="utf-8")
        (out / "telemetry.csv").write_text(result.telemetry_csv(), encoding="utf-8")
        summary = {"name": cfg.name, **result.summary()}
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write results to {out}: {exc}") from exc


def summary_table(result: RunResult) -> str:
    rows = [f"{'delta_p':>8} {'force_N':>9} {'std_N':>7} {'max_sat':>8} {'back_sat':>8} conv"]
    for s in result.segments:
        if s.delta_p is None or s.delta_p <= 0.0:
            continue
        rows.append(
            f"{s.delta_p:8.2f} {s.force_mean:9.3f} {s.force_std:7.3f} "
            f"{s.max_saturation:8.3f} {s.max_back_saturation:8.3f} {'yes' if s.converged else 'no'}"
        )
    rows.append(f"status: {result.status}" + (f" ({result.reason})" if result.reason else ""))
    return "\n".join(rows)


def _execute(cfg: ScenarioConfig, out: Path | None, quiet: bool = False) -> RunResult:
    result = run_scenario(cfg)
    if out is not None:
        write_run(result, cfg, out)
    if not quiet:
        print(f"[{cfg.name}]")
        print(summary_table(result))
    return result


# -- subcommands -----------------------------------------------------------------------


def cmd_validate(args) -> int:
    cfg = _with_seed(load_config(args.config, args.set), args.seed)
    print(f"{args.config}: ok ({cfg.name}, {len(cfg.waypoints)} waypoints, {cfg.sim.duration:g} s)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _with_seed(load_config(args.config, args.set), args.seed)
    result = _execute(cfg, args.out)
    return EXIT_OK if result.ok else EXIT_UNSTABLE


def cmd_case1(args) -> int:
    cfg = _template("case1", args.set, args.seed)
    result = _execute(cfg, args.out)
    return EXIT_OK if result.ok else EXIT_UNSTABLE


def cmd_case2(args) -> int:
    staged = _template("case2", args.set, args.seed)
    direct = case2_template((CASE2_DIRECT_DELTA_P,))
    if args.set:
        direct = config_from_dict(apply_overrides(config_to_dict(direct), args.set))
    direct = _with_seed(direct, args.seed)
    out = args.out
    results = [
        _execute(staged, out / "staged" if out else None),
        _execute(direct, out / "direct" if out else None),
    ]
    return EXIT_OK if all(r.ok for r in results) else EXIT_UNSTABLE


def _split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside brackets, so ``[1,2],[3,4]`` gives two values."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts if p.strip()]


def parse_grid(items: Sequence[str]) -> list[tuple[str, list[str]]]:
    grid = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid entry '{item}' is not of the form key=v1,v2,...")
        key, values = item.split("=", 1)
        vals = _split_top_level(values)
        if not vals:
            raise ConfigError(f"grid entry '{key}' has no values")
        grid.append((key.strip(), vals))
    return grid


def _sweep_job(job: tuple[dict, list[str], str, int | None]) -> dict:
    data, overrides, out, seed = job
    cfg = _with_seed(config_from_dict(apply_overrides(data, overrides)), seed)
    result = run_scenario(cfg)
    write_run(result, cfg, Path(out))
    return {"dir": Path(out).name, "overrides": overrides, **result.summary()}


def cmd_sweep(args) -> int:
    data = apply_overrides(loads_raw(read_config_text(args.config)), args.set)
    grid = parse_grid(args.grid)
    out = args.out or Path("sweep_out")
    jobs = []
    for i, combo in enumerate(itertools.product(*(vals for _, vals in grid))):
        overrides = [f"{key}={val}" for (key, _), val in zip(grid, combo)]
        # validate up front so a bad grid fails before any run starts
        config_from_dict(apply_overrides(data, overrides))
        jobs.append((data, overrides, str(out / f"run_{i:03d}"), args.seed))

    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(_sweep_job, jobs))

    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write sweep index to {out}: {exc}") from exc
    for row in rows:
        print(f"{row['dir']}  {' '.join(row['overrides'])}  status={row['status']}  "
              f"peak_force={row['peak_force']:.3f}  max_sat={row['max_saturation']:.3f}")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_UNSTABLE


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized runs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tiltpush", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run a grid of overrides in parallel")
    p.add_argument("config", type=Path)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...", required=True)
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="parse and check a scenario file")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("case1", parents=[common], help="staged push with the CoM shifted forward")
    p.set_defaults(func=cmd_case1)

    p = sub.add_parser("case2", parents=[common], help="push with the plate held at l=0")
    p.set_defaults(func=cmd_case2)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
