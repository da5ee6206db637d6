"""Command-line driver: analyze, simulate, certify.

Exit statuses: 0 pass/success, 2 parse error, 3 structural fail,
4 inequality violation or missed final-error threshold, 5 divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .certify import certify, compute_constants
from .dynamics import integrate, resolve_root_set
from .errors import (CapacityError, CheckUsageError, GraphDomainError,
                     IntegrationDivergedError, ScenarioError,
                     RootSetMismatchError, StructuralCheckError)
from .graphs import (check_persistent_balance, check_uniform_qs_connectivity,
                     longest_path_from_roots, union_graph)
from .plots import write_trajectory_svg
from .scenario_io import (analysis_to_text, csv_header, parse_scenario,
                          report_to_text, write_trajectory_csv)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_STRUCTURAL = 3
EXIT_INEQUALITY = 4
EXIT_DIVERGED = 5


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_analyze(args) -> int:
    scenario = parse_scenario(args.scenario)
    conn = check_uniform_qs_connectivity(scenario.schedule, scenario.delta,
                                         scenario.window)
    S = None
    if conn.holds and conn.fixed:
        S = set(conn.root_set)
    elif scenario.root_set is not None:
        S = set(scenario.root_set)

    balance = d0 = constants = None
    if S is not None:
        balance = check_persistent_balance(scenario.schedule, scenario.delta, S)
        sched = scenario.schedule
        arcs = union_graph(sched, scenario.delta, sched.t_start,
                           sched.t_start + sched.period).arcs
        try:
            d0 = longest_path_from_roots(arcs, S,
                                         nodes=set(range(scenario.n_agents)))
            constants = compute_constants(scenario, tuple(S), d0)
        except GraphDomainError:
            pass

    text = analysis_to_text(conn, balance, d0, constants)
    sys.stdout.write(text)
    path = _out_path(args.out, _stem(args.scenario) + "_analysis.txt")
    with open(path, "w") as fh:
        fh.write(text)
    print(f"analysis written to {path}")

    ok = conn.holds and conn.fixed and balance is not None and balance.balanced
    return EXIT_OK if ok else EXIT_STRUCTURAL


def cmd_simulate(args) -> int:
    scenario = parse_scenario(args.scenario)
    if args.dt is not None or args.horizon is not None:
        scenario = dataclasses.replace(
            scenario,
            dt=args.dt if args.dt is not None else scenario.dt,
            horizon=args.horizon if args.horizon is not None else scenario.horizon)
        scenario.validate()
    closed = args.mode == "closed"
    stem = f"{_stem(args.scenario)}_{args.mode}"
    csv_path = _out_path(args.out, stem + ".csv")
    try:
        traj = integrate(scenario, closed_loop=closed)
    except IntegrationDivergedError as exc:
        if exc.times is not None:
            # Partial CSV: whatever was integrated before the blow-up.
            with open(csv_path, "w") as fh:
                fh.write(csv_header(scenario.n_agents) + "\n")
                for k in range(len(exc.times)):
                    row = [exc.times[k], *exc.states[k]]
                    row += [0.0] * scenario.n_agents + [float("nan")] * 4
                    fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    write_trajectory_csv(traj, csv_path)
    svg_path = _out_path(args.out, stem + ".svg")
    write_trajectory_svg(traj, svg_path, show_targets=closed)
    print(f"trajectory written to {csv_path}")
    print(f"plot written to {svg_path}")
    return EXIT_OK


def cmd_certify(args) -> int:
    scenario = parse_scenario(args.scenario)
    try:
        report = certify(scenario, chi=args.chi)
    except IntegrationDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    text = report_to_text(report)
    sys.stdout.write(text)
    path = _out_path(args.out, _stem(args.scenario) + "_report.txt")
    with open(path, "w") as fh:
        fh.write(text)
    print(f"report written to {path}")

    if report.convergence_verdict:
        return EXIT_OK
    if not report.structural.ok:
        return EXIT_STRUCTURAL
    return EXIT_INEQUALITY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opinionsteer",
        description="Simulate and certify targeted opinion steering on "
                    "signed switching networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="structural checks and constants")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="integrate and dump CSV/SVG")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mode", required=True, choices=["open", "closed"])
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="full certification run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--chi", type=float, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GraphDomainError, CheckUsageError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (StructuralCheckError, RootSetMismatchError) as exc:
        print(f"structural error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())
