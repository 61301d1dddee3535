"""Command-line entry point: ``run``, ``oracle``, ``calibrate`` and ``cases``.

Every command prints one JSON object on stdout. Failures print one JSON
object with an ``error`` key on stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (CASE_DESCRIPTIONS, CASES, calibrate, emit_csv, emit_summary,
                      load_scenario, oracle_check, run_campaign, seed_from_env)


def _scenario(args):
    """Load ``--config`` (a YAML file or a preset name) and apply seed/trial overrides."""
    source = args.config
    if source in CASES and not Path(source).exists():
        sc = CASES[source]()
    else:
        sc = load_scenario(source)
    # Precedence: --seed, then RISRIC_SEED, then the scenario file.
    seed = args.seed if getattr(args, "seed", None) is not None else seed_from_env(sc.seed)
    sc = replace(sc, seed=seed)
    if getattr(args, "trials", None) is not None:
        sc = replace(sc, trials=args.trials)
    return sc


def cmd_run(args):
    sc = _scenario(args)
    if not sc.calibrated:
        sc = calibrate(sc)
    result = run_campaign(sc, keep_traces=True)
    paths = emit_csv(result, args.out)
    paths["summary"] = emit_summary(result, args.out)
    return {"case": sc.name, "trials": result.trials, "seed": sc.seed,
            "dbfs_to_dbm_offset": sc.meas.dbfs_to_dbm_offset,
            "mean_improvement_db": result.mean_improvement_db.tolist(),
            "files": {k: str(v) for k, v in paths.items()}}


def cmd_oracle(args):
    sc = _scenario(args)
    out = oracle_check(sc, args.trial)
    out["gap_db"] = out["exhaustive_objective"] - out["greedy_objective"]
    return {"case": sc.name, "trial": args.trial, **out}


def cmd_calibrate(args):
    sc = calibrate(_scenario(args))
    return {"case": sc.name, "dbfs_to_dbm_offset": sc.meas.dbfs_to_dbm_offset}


def cmd_cases(args):
    return {"cases": [{"name": name, "description": CASE_DESCRIPTIONS[name],
                       "n_ue": CASES[name]().n_ue, "policy": str(CASES[name]().policy),
                       "trials": CASES[name]().trials} for name in CASES]}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risric",
                                description="RIS optimization over an emulated near-RT RIC")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-trial campaign and write CSVs")
    run.add_argument("--config", required=True, help="scenario YAML file or preset name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="greedy vs exhaustive search on a small scenario")
    orc.add_argument("--config", required=True)
    orc.add_argument("--trial", type=int, default=0)
    orc.add_argument("--seed", type=int)
    orc.set_defaults(func=cmd_oracle)

    cal = sub.add_parser("calibrate", help="fit the dBFS-to-dBm offset")
    cal.add_argument("--config", required=True)
    cal.add_argument("--seed", type=int)
    cal.set_defaults(func=cmd_calibrate)

    cases = sub.add_parser("cases", help="list built-in case presets")
    cases.set_defaults(func=cmd_cases)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = args.func(args)
    except Exception as exc:  # one machine-readable line, whatever went wrong
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(out))
    return 0
