"""Command-line interface.

Exit codes: 0 ok, 1 configuration/CLI error (or failed verification),
2 stability violation, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigurationError, StabilityError
from . import analysis, harness


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="slipflow",
                description="Stochastic slip-wall Stokes flows: simulate, "
                            "sweep, verify, fit")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration file")
    sim.add_argument("--config", required=True, help="flat key = value file")
    sim.add_argument("--out", default="out", help="output directory")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--force", action="store_true",
                     help="run past a stability violation")

    sw = sub.add_parser("sweep", help="run a canned or file-defined plan")
    sw.add_argument("--plan", required=True,
                    help="plan name (see `plans --list`) or JSON plan file")
    sw.add_argument("--out", default=None, help="output directory")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--force", action="store_true")
    sw.add_argument("--realizations", type=int, default=None,
                    help="override the ensemble size of every variant")

    ver = sub.add_parser("verify", help="closed-form analysis checks")
    ver.add_argument("--csv", default=None, help="also write results as CSV")

    fit = sub.add_parser("fit", help="scaling report from a sweep CSV")
    fit.add_argument("--in", dest="infile", required=True)

    pl = sub.add_parser("plans", help="inspect canned plans")
    pl.add_argument("--list", action="store_true", default=True)
    return p


def _cmd_simulate(args) -> int:
    config = harness.parse_config_file(args.config)
    name = os.path.splitext(os.path.basename(args.config))[0]
    plan = harness.ExperimentPlan(name=name, variants=[config],
                                  seed=config.seed)
    manifest = harness.run_plan(plan, args.out, workers=args.workers,
                                force=args.force)
    print(f"wrote {len(manifest.variants)} series to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    plans = harness.canned_plans()
    if args.plan in plans:
        plan = plans[args.plan]
    elif os.path.exists(args.plan):
        plan = harness.load_plan_file(args.plan)
    else:
        raise ConfigurationError(
            f"unknown plan {args.plan!r}; available: {', '.join(sorted(plans))}")
    out = args.out or f"out-{plan.name}"
    print(f"plan {plan.name}: {len(plan.variants)} variants -> {out}")
    harness.run_plan(plan, out, workers=args.workers, force=args.force,
                     realizations=args.realizations)
    print(f"wrote sweep.csv and manifest.json to {out}")
    return 0


def _cmd_verify(args) -> int:
    checks = analysis.run_verification()
    width = max(len(c.name) for c in checks)
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"{mark}  {c.name:<{width}}  value={c.value:.10g}  "
              f"ref={c.reference:.10g}  tol={c.tolerance:g}")
    n_bad = sum(not c.passed for c in checks)
    print(f"{len(checks) - n_bad}/{len(checks)} checks passed")
    if args.csv:
        lines = ["name,value,reference,tolerance,passed"]
        for c in checks:
            lines.append(f"{c.name},{c.value:.17g},{c.reference:.17g},"
                         f"{c.tolerance:g},{int(c.passed)}")
        with open(args.csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.csv}")
    return 0 if n_bad == 0 else 1


def _cmd_fit(args) -> int:
    report = harness.fit_report(args.infile)
    print(report.format())
    return 0


def _cmd_plans(_args) -> int:
    for name, plan in sorted(harness.canned_plans().items()):
        print(f"{name}: {len(plan.variants)} variants -- {plan.description}")
        for v in plan.variants:
            print(f"    {v.label()}  dt={v.dt}  N={v.realizations}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"simulate": _cmd_simulate, "sweep": _cmd_sweep,
                   "verify": _cmd_verify, "fit": _cmd_fit,
                   "plans": _cmd_plans}[args.command]
        return handler(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StabilityError as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
