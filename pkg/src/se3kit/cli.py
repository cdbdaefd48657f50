"""Command-line entry point.

Subcommands: cg dump, equivariance-test, gic-sim, mdp-demo, selftest.
Exit codes: 0 when all checks pass, 1 on a check failure (with a JSON failure
summary on stdout), 2 on usage errors.  All outputs are deterministic given
the seed; reports carry no timestamps.  SE3KIT_THREADS caps internal
parallelism (see ``se3kit.backend``).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import gimdp, plant, selftest, steerable
from .backend import BACKEND
from .harmonics import CGTable
from .models import load_model
from .plant import load_scenario

_EQUIVARIANCE_TOL = 1e-8


def _write_json(path, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_cg_dump(args) -> int:
    table = CGTable()
    rows = list(table.iter_nonzero(args.lmax))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("l1", "m1", "l2", "m2", "l", "m", "value"))
        for row in rows:
            writer.writerow(row[:6] + (repr(row[6]),))
    print(f"wrote {len(rows)} coefficients to {args.out}")
    return 0


def _cmd_equivariance_test(args) -> int:
    report = steerable.equivariance_report(args.layer, args.lmax, args.trials,
                                           args.seed)
    report["backend"] = BACKEND
    report["tolerance"] = _EQUIVARIANCE_TOL
    report["passed"] = report["max_residual"] < _EQUIVARIANCE_TOL
    _write_json(args.out, report)
    print(f"{args.layer}: max residual {report['max_residual']:.3e} "
          f"({'pass' if report['passed'] else 'FAIL'})")
    if not report["passed"]:
        _write_json("-", {"failure": "equivariance residual above tolerance",
                          "layer": args.layer,
                          "max_residual": report["max_residual"]})
        return 1
    return 0


def _cmd_gic_sim(args) -> int:
    model = load_model(args.model)
    scenario = load_scenario(args.scenario, model)
    trace = plant.run_closed_loop(model, scenario, variant=args.variant)
    trace.to_csv(args.out)
    print(f"wrote {len(trace.t)} rows to {args.out}; terminal error function "
          f"{trace.psi[-1]:.3e}, max dissipation residual "
          f"{np.abs(trace.residual[1:]).max() if len(trace.t) > 1 else 0.0:.3e}")
    return 0


def _cmd_mdp_demo(args) -> int:
    report = gimdp.mdp_demo_report(gamma=args.gamma, tol=args.tol)
    ok = (report["invariance"]["reward_invariant"]
          and report["invariance"]["transition_invariant"]
          and report["symmetry"]["q_invariant"]
          and report["symmetry"]["argmax_sets_equivariant"])
    report["passed"] = ok
    _write_json(args.out, report)
    print(f"gridworld symmetry checks: {'pass' if ok else 'FAIL'}")
    if not ok:
        _write_json("-", {"failure": "gridworld symmetry checks failed"})
        return 1
    return 0


def _cmd_selftest(args) -> int:
    report = selftest.run_selftest(args.seed, lie_trials=args.lie_trials,
                                   tfn_trials=args.tfn_trials,
                                   escn_trials=args.escn_trials,
                                   gic_runs=args.gic_runs)
    for suite in report["suites"]:
        print(f"[{'pass' if suite['passed'] else 'FAIL'}] {suite['name']}")
    if args.out:
        _write_json(args.out, report)
    if not report["passed"]:
        _write_json("-", {"failure": "selftest suites failed",
                          "failed": [s["name"] for s in report["suites"]
                                     if not s["passed"]]})
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="se3kit",
        description="SE(3) geometric computing toolkit: coefficient dumps, "
                    "equivariance reports, impedance-control simulations, and "
                    "symmetric-MDP demos.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cg = sub.add_parser("cg", help="Clebsch-Gordan table utilities")
    cg_sub = p_cg.add_subparsers(dest="cg_command", required=True)
    p_dump = cg_sub.add_parser("dump", help="dump coefficients to CSV")
    p_dump.add_argument("--lmax", type=int, required=True)
    p_dump.add_argument("--out", required=True)
    p_dump.set_defaults(func=_cmd_cg_dump)

    p_eq = sub.add_parser("equivariance-test", help="layer residual report")
    p_eq.add_argument("--layer", required=True,
                      choices=("tfn", "escn", "attention", "self", "identity"))
    p_eq.add_argument("--lmax", type=int, default=2)
    p_eq.add_argument("--trials", type=int, default=100)
    p_eq.add_argument("--seed", type=int, default=0)
    p_eq.add_argument("--out", default="report.json")
    p_eq.set_defaults(func=_cmd_equivariance_test)

    p_sim = sub.add_parser("gic-sim", help="closed-loop impedance-control run")
    p_sim.add_argument("--model", default="builtin:elbow6",
                       help="model JSON path or builtin:{elbow6,pendulum1,planar2}")
    p_sim.add_argument("--scenario", default="builtin:regulation",
                       help="scenario JSON path or builtin:{at-goal,regulation,circle}")
    p_sim.add_argument("--variant", type=int, choices=(1, 2), default=None)
    p_sim.add_argument("--out", default="trace.csv")
    p_sim.set_defaults(func=_cmd_gic_sim)

    p_mdp = sub.add_parser("mdp-demo", help="symmetric gridworld value iteration")
    p_mdp.add_argument("--gamma", type=float, default=0.95)
    p_mdp.add_argument("--tol", type=float, default=1e-10)
    p_mdp.add_argument("--out", default="mdp_report.json")
    p_mdp.set_defaults(func=_cmd_mdp_demo)

    p_self = sub.add_parser("selftest", help="run every module's invariant suite")
    p_self.add_argument("--seed", type=int, default=0)
    p_self.add_argument("--out", default=None)
    p_self.add_argument("--lie-trials", type=int, default=1000)
    p_self.add_argument("--tfn-trials", type=int, default=200)
    p_self.add_argument("--escn-trials", type=int, default=500)
    p_self.add_argument("--gic-runs", type=int, default=100)
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
