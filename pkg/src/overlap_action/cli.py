"""``overlap-action`` command-line front end.

Exit codes: 0 all oracle comparisons pass, 1 usage or scenario error,
2 numerical non-convergence, 3 oracle failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace

from .emcore import DomainError
from .experiments import COMMANDS, Row
from .quad3d import ConfigurationError, QuadratureError
from .scenario import ROUTES, ScenarioError, parse_scenario

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_ORACLE = 0, 1, 2, 3
CSV_COLUMNS = ("quantity", "route", "value", "error", "oracle", "provenance", "status")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="overlap-action", description=(
        "Compare the potential and field-overlap interaction Lagrangians and "
        "compute Aharonov-Bohm phases by both routes."))
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS), help="experiment to run")
    ap.add_argument("--scenario", help="scenario JSON file")
    ap.add_argument("--route", choices=ROUTES, help="override the scenario's route")
    ap.add_argument("--rel-tol", type=float, help="override the quadrature relative tolerance")
    ap.add_argument("--out", help="write the CSV table here and print a readable report")
    ap.add_argument("--paper-suite", action="store_true",
                    help="run the full acceptance battery on the built-in scenarios")
    return ap


def fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow((r.quantity, r.route, fmt(r.value), fmt(r.error), fmt(r.oracle), r.provenance, r.status))
    return buf.getvalue()


def rows_to_table(rows: list[Row]) -> str:
    head = f"{'quantity':44s} {'route':9s} {'value':>24s} {'error':>10s} {'oracle':>24s} status"
    lines = [head, "-" * len(head)]
    for r in rows:
        oracle = "" if r.oracle is None else f"{r.oracle:.15g}"
        lines.append(f"{r.quantity:44s} {r.route:9s} {r.value:24.15g} {r.error:10.2e} {oracle:>24s} {r.status}")
        if r.provenance:
            lines.append(f"    {r.provenance}")
    return "\n".join(lines)


def exit_code(rows: list[Row]) -> int:
    return EXIT_ORACLE if any(r.status == "fail" for r in rows) else EXIT_OK


def run_command(command: str, scenario_path: str, route: str | None = None,
                rel_tol: float | None = None) -> list[Row]:
    sf = parse_scenario(scenario_path)
    if route is not None:
        sf = replace(sf, route=route)
    if rel_tol is not None and not rel_tol > 0:
        raise UsageError("--rel-tol must be positive")
    return COMMANDS[command](sf, sf.route, rel_tol)


def run_paper_suite(out: str | None, stream=sys.stdout) -> int:
    from .suite import CRITERIA, run_criterion

    all_rows: list[Row] = []
    summary, results = [], []
    for c in CRITERIA:
        res = run_criterion(c)
        results.append(res)
        print(f"\n== criterion {c.number}: {c.title}", file=stream)
        print(rows_to_table([r for _, r in res.rows]), file=stream)
        summary.append(res.summary())
        all_rows += [replace(r, quantity=f"c{c.number}:{f.removesuffix('.json')}:{r.quantity}")
                     for f, r in res.rows]
    print("\n" + "\n".join(summary), file=stream)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv(all_rows))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ORACLE


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.paper_suite:
            return run_paper_suite(args.out)
        if args.command is None:
            raise UsageError("a command is required unless --paper-suite is given")
        if not args.scenario:
            raise UsageError("--scenario is required")
        rows = run_command(args.command, args.scenario, args.route, args.rel_tol)
    except (UsageError, ScenarioError) as exc:
        print(f"overlap-action: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as exc:
        print(f"overlap-action: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ConfigurationError, DomainError) as exc:
        print(f"overlap-action: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(rows_to_table(rows))
    else:
        sys.stdout.write(text)
    return exit_code(rows)


if __name__ == "__main__":
    sys.exit(main())
