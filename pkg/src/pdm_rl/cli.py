"""Command-line entry point: ``pdm-rl {train,sweep,report,gradcheck,envcheck}``.

Exit codes: 0 success, 1 runtime or check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import envs, gradcheck, harness, metrics
from .config import ConfigError, TrainConfig, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write_run_summary(out: Path, config: TrainConfig, records) -> None:
    ok = [r.scores for r in records if not r.failed and len(r)]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["env", "algorithm", "mode", "n_runs", "attrition", "max_score",
                    "rel_spread_pct", "rel_iter"])
        row = [config.env, config.algorithm.value, config.mode.value, len(ok), len(records) - len(ok)]
        if ok:
            s = metrics.summarize(ok)
            row += [f"{s.max_score:.1f}", f"{s.rel_spread:.2f}", s.rel_iter]
        w.writerow(row)


def cmd_train(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.replace(seeds=[args.seed])
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    records = harness.run(config, out)
    _write_run_summary(out, config, records)
    for r in records:
        status = f"FAILED ({r.error})" if r.failed else f"final smoothed {metrics.smooth(r.scores)[-1]:.1f}" if len(r) else "empty"
        print(f"seed {r.seed}: {len(r)} iterations, {status}")
    return EXIT_FAIL if any(r.failed for r in records) else EXIT_OK


def cmd_sweep(args) -> int:
    try:
        base = load_config(args.config)
        grid = json.loads(Path(args.grid).read_text())
        if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
            raise ConfigError("grid", "must map config keys to lists of values")
        keys = sorted(grid)
        combos = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
        configs = [base.replace(**c) for c in combos]
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read sweep inputs: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failed = False
    for combo, config in zip(combos, configs):
        name = "_".join(f"{k}={combo[k]}" for k in keys) or "base"
        records = harness.run(config, Path(args.out) / name)
        _write_run_summary(Path(args.out) / name, config, records)
        failed |= any(r.failed for r in records)
        print(f"{name}: {len(records)} runs")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(args) -> int:
    from .report import build_report

    bad = []
    for d in list(args.runs) + list(args.baseline):
        try:
            harness.load_run_dir(d)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            bad.append(f"{d}: {exc}")
    if bad:
        print("missing or corrupt run records:", file=sys.stderr)
        for line in bad:
            print(f"  {line}", file=sys.stderr)
        return EXIT_FAIL
    result = build_report(args.runs, args.baseline, args.out, seed=args.metrics_seed)
    for row in result["rows"]:
        print(", ".join(f"{k}={v}" for k, v in row.items() if k != "baseline"))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials == 0:
        print("gradcheck: 0 trials requested, vacuous pass")
        return EXIT_OK
    worst = 0.0
    offender = None
    for res in gradcheck.run_all(args.trials, args.seed):
        print(f"{res.name:>12}: {res.trials} instances, worst relative error {res.worst_error:.3e} "
              f"(seed {res.worst_seed})")
        if res.worst_error >= worst:
            worst = res.worst_error
            offender = res
    print(f"worst relative error {worst:.3e}, tolerance {args.tolerance:.1e}")
    if not worst < args.tolerance:
        print(f"FAIL: {offender.name} instance seed {offender.worst_seed} exceeds tolerance", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def envcheck_results(seed: int = 0) -> list[tuple[str, bool, str]]:
    out = []
    for name in sorted(envs.ENVIRONMENTS):
        a, b = envs.make(name), envs.make(name)
        same = np.array_equal(a.reset(seed), b.reset(seed))
        out.append((f"{name} reset determinism", same, ""))
        rng = np.random.default_rng(seed)
        a.reset(seed)
        steps, total = 0, 0.0
        while True:
            act = rng.integers(a.num_actions) if a.discrete else rng.uniform(-2, 2, size=1)
            r = a.step(act)
            steps += 1
            total += r.reward
            if r.terminated or r.truncated:
                break
        out.append((f"{name} random episode within horizon", steps <= a.horizon,
                    f"{steps} steps, return {total:.1f}"))

    cp = envs.CartPole()
    cp.reset(0)
    cp.state = np.zeros(4)
    obs = cp.step(1).observation
    expect = np.array([0.0, 0.19512195121951217, 0.0, -0.2926829268292683])
    out.append(("cartpole single Euler step", bool(np.allclose(obs, expect, atol=1e-12, rtol=0)),
                np.array2string(obs, precision=6)))

    pend = envs.PendulumSwingup(dt=1e-4, horizon=10**6, clip_speed=False)
    pend.reset(seed)
    pend.state = np.array([0.5, 1.0])
    e0 = pend.energy()
    for _ in range(1000):
        pend.step([0.0])
    drift = abs(pend.energy() - e0) / abs(e0)
    out.append(("pendulum energy drift < 0.1%", drift < 1e-3, f"{drift:.2e}"))
    return out


def cmd_envcheck(args) -> int:
    ok = True
    for name, passed, detail in envcheck_results(args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name} {detail}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdm-rl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one configuration over its seeds")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, help="run only this seed (overrides the config's seeds)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="grid over config keys; one run directory per combination")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", required=True, help="JSON file mapping keys to lists of values")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="summary table, profiles and plots from run directories")
    r.add_argument("--runs", nargs="+", required=True)
    r.add_argument("--baseline", nargs="+", required=True)
    r.add_argument("--out", default="report")
    r.add_argument("--metrics-seed", type=int, default=0)
    r.set_defaults(func=cmd_report)

    g = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--tolerance", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    e = sub.add_parser("envcheck", help="sanity checks of the environment dynamics")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_envcheck)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "trials", 0) < 0:
        print("--trials must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
