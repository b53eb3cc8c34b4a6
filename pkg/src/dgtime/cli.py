"""Command line entry point: ``dgtime run`` and ``dgtime study``."""

from __future__ import annotations

import argparse
import logging
import sys

from dgtime.errors import ConvergenceReport, expected_rates
from dgtime.problems import PROBLEMS
from dgtime.study import (
    StudyConfig,
    compare_golden,
    load_golden,
    report_to_csv,
    run_case,
    run_study,
    write_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgtime", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", choices=sorted(PROBLEMS), default="wave1d")
    common.add_argument("--T", type=float, default=1.0, help="final time")
    common.add_argument("--gamma", type=float, default=None, help="damping (problem default 1.0)")
    common.add_argument("--weighting", choices=("full", "stiffness", "velocity"), default=None,
                        help="energy-norm displacement weighting (problem default)")
    common.add_argument("--initial", choices=("nodal", "ritz"), default="nodal")
    common.add_argument("--out", metavar="FILE", help="write the CSV here instead of stdout")

    run = sub.add_parser("run", parents=[common], help="single solve")
    run.add_argument("--q", type=int, required=True)
    run.add_argument("--r", type=int, default=None, help="spatial degree (default q-1 in 1D, q in 2D)")
    run.add_argument("--k", type=float, required=True)
    run.add_argument("--dump-matrices", metavar="DIR", help="write per-slab A and b (MatrixMarket)")

    st = sub.add_parser("study", parents=[common], help="convergence study")
    st.add_argument("--q-list", type=_int_list, default=[2, 3, 4, 5])
    st.add_argument("--r-rule", default=None, help="qm1, q or fixed:N")
    st.add_argument("--levels", type=_float_list, default=None, help="decreasing step sizes")
    st.add_argument("--golden", metavar="FILE", help="reference CSV, or table1/table2/table3")
    st.add_argument("--tol-error", type=float, default=0.05)
    st.add_argument("--tol-rate", type=float, default=0.1)
    st.add_argument("--rates-only", action="store_true", help="compare rates but not error values")
    st.add_argument("--workers", type=int, default=1)
    return p


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    r_rule = f"fixed:{args.r}" if args.r is not None else None
    config = StudyConfig(problem=args.problem, q_list=[args.q], r_rule=r_rule, levels=[args.k],
                         T=args.T, gamma=args.gamma, weighting=args.weighting,
                         initial=args.initial, diagnostics=True)
    q, r, k = config.cases()[0]
    if args.dump_matrices:
        from dgtime.slab import TimeMesh, advance

        problem = config.build_problem()
        system = problem.build(int(round(1.0 / k)), r)
        advance(problem, system, TimeMesh.uniform(problem.T, k, q),
                initial=args.initial, dump_dir=args.dump_matrices)
    row, diag = run_case(config, q, r, k)
    report = ConvergenceReport([row], {(q, r): expected_rates(q, r)}, {(q, k): diag})
    _emit(report_to_csv(report), args.out)
    if row.note:
        print(f"run failed: {row.note}", file=sys.stderr)
        return EXIT_FAIL
    for key, val in diag.items():
        print(f"# {key} = {val:.6e}", file=sys.stderr)
    return EXIT_OK


def cmd_study(args) -> int:
    config = StudyConfig(problem=args.problem, q_list=args.q_list, r_rule=args.r_rule,
                         levels=args.levels, T=args.T, gamma=args.gamma, golden=args.golden,
                         tol_error=args.tol_error, tol_rate=args.tol_rate,
                         weighting=args.weighting, initial=args.initial, workers=args.workers)
    golden = load_golden(config.golden) if config.golden else None
    report = run_study(config)
    if args.out:
        write_csv(report, args.out)
    else:
        sys.stdout.write(report_to_csv(report))

    failed = any(row.note for row in report.rows)
    if golden is not None:
        try:
            results = compare_golden(report, golden, config.tol_error, config.tol_rate,
                                     check_errors=not args.rates_only)
        except KeyError as exc:
            print(f"golden comparison: {exc.args[0]}", file=sys.stderr)
            return EXIT_CONFIG
        for res in results:
            status = "PASS" if res.passed else "FAIL"
            detail = "; ".join(res.failures)
            print(f"{status} q={res.q} k={res.k:g} {detail}".rstrip(), file=sys.stderr)
        failed = failed or not all(res.passed for res in results)
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_study(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
