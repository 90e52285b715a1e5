# csp_sched/cli.py
"""
Main CLI entry point for csp-sched.

Usage:
  csp-sched generate --seed 1 --n 6 --m 2 -o inst.json
  csp-sched generate --seed 1 --count 100 -o instances/
  csp-sched solve inst.json --algorithm fptas --epsilon 0.5 -o sol.json --report runs.csv
  csp-sched solve inst.json --algorithm mixed+greedy --epsilon 0.2
  csp-sched verify inst.json sol.json --beta 1.1
  csp-sched compare "instances/*.json" --algorithms exact,greedy,fptas

Exit codes: 0 ok, 1 infeasible or ratio failure, 2 usage / parse /
precondition error, 3 resource cap exceeded.
"""

import argparse
import logging
import math
import sys
from pathlib import Path

from errors import CspSchedError, ResourceCapError

EXIT_OK         = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE      = 2
EXIT_RESOURCE   = 3

sep = "─" * 60


def _say(text: str = '') -> None:
    # Banners go to stderr so stdout stays clean for JSON / CSV.
    print(text, file=sys.stderr)


# ─── generate ─────────────────────────────────────────────────────────────────

def run_generate(args) -> int:
    from file_manager import dump_json, write_instance
    from generators import GeneratorConfig, generate_instance
    from parsers import instance_to_json

    if args.count < 1:
        raise ValueError(f"--count must be ≥ 1, got {args.count}")
    if args.count > 1 and not args.output:
        raise ValueError("--count > 1 needs --output DIR")

    configs = [
        GeneratorConfig(
            seed=args.seed + i,
            n=args.n,
            max_prefs_per_user=args.max_prefs,
            m=args.m,
            angle_max=args.angle_max,
            capacity_profile=args.capacity_profile,
            capacity_base=args.capacity_base,
            magnitude_range=tuple(args.magnitude_range),
            utility_model=args.utility_model,
            elastic_fraction=args.elastic_fraction,
            window_model=args.window_model,
            demand_model=args.demand_model,
        )
        for i in range(args.count)
    ]

    if not args.output:
        sys.stdout.write(dump_json(instance_to_json(generate_instance(configs[0]))))
        return EXIT_OK

    if args.count == 1 and Path(args.output).suffix == '.json':
        path = write_instance(generate_instance(configs[0]), args.output)
        _say(f"  ✅ {path}")
        return EXIT_OK

    out_dir = Path(args.output)
    for config in configs:
        write_instance(generate_instance(config), out_dir / f"inst-{config.seed:04d}.json")
    _say(f"  ✅ {args.count} instance(s) written to {out_dir}/")
    return EXIT_OK


# ─── solve ────────────────────────────────────────────────────────────────────

def run_solve(args) -> int:
    from file_manager import (
        REPORT_FIELDS,
        append_report_row,
        dump_json,
        format_report_row,
        write_report,
        write_solution,
    )
    from orchestrator import solve_file
    from parsers import solution_to_json
    from planners import SolveRequest

    request = SolveRequest(
        algorithm=args.algorithm,
        epsilon=args.epsilon,
        delta=args.delta,
        angle_margin=args.angle_margin,
        normalize=args.normalize,
    )
    instance, plan, outcome = solve_file(args.instance, request)
    report = outcome.report

    if args.output:
        write_solution(outcome.record, args.output)
    else:
        sys.stdout.write(dump_json(solution_to_json(outcome.record)))

    row = format_report_row(
        str(args.instance), plan.label, plan.epsilon if plan.uses_epsilon else None,
        report.utility, report.violation_beta, report.elapsed,
    )
    if args.report:
        append_report_row(row, args.report)

    _say(f"\n{sep}")
    _say(f"  CSP-SCHED SOLVE — {plan.label}")
    _say(sep)
    if plan.name == 'greedy-sequential' or plan.inner and plan.inner.name == 'greedy-sequential':
        _say("  ⚠  greedy-sequential is a heuristic: no approximation guarantee")
    _say(f"  Instance : {args.instance}  (m={instance.m}, n={instance.n})")
    _say(f"  Utility  : {report.utility:.10g}")
    _say(f"  Beta     : {report.violation_beta:.10g}  (advertised ≤ {plan.advertised_beta():g})")
    _say(f"  Time     : {report.elapsed * 1000:.3f} ms")
    if outcome.rho:
        _say(f"  Rotation : ρ={outcome.rho:.6g} rad")
    if args.beta_report:
        for t, (load, cap) in enumerate(zip(report.per_slot_load, instance.capacities), start=1):
            _say(f"    slot {t}: |load|={load.magnitude:.6g}  C_t={cap:.6g}  ratio={load.magnitude / cap:.6g}")
    if not args.report:
        _say()
        write_report([row], sys.stderr, REPORT_FIELDS)

    if not outcome.audit_ok:
        _say("\n  ❌ Output fails its own audit:")
        for line in outcome.diagnostics:
            _say(f"     {line}")
        _say(sep)
        return EXIT_INFEASIBLE
    _say(sep)
    return EXIT_OK


# ─── verify ───────────────────────────────────────────────────────────────────

def run_verify(args) -> int:
    from audit import audit_solution
    from file_manager import load_instance, load_solution

    instance = load_instance(args.instance)
    record = load_solution(args.solution)
    result = audit_solution(instance, record, args.beta)

    _say(f"\n{sep}")
    _say(f"  CSP-SCHED VERIFY — β={args.beta:g}")
    _say(sep)
    if result.report is not None:
        _say(f"  Utility : {result.report.utility:.10g}")
        _say(f"  Beta    : {result.report.violation_beta:.10g}")
    if result.ok:
        _say("\n  ✅ Feasible")
        _say(sep)
        return EXIT_OK
    _say("\n  ❌ Infeasible:")
    for line in result.diagnostics:
        _say(f"     {line}")
    _say(sep)
    return EXIT_INFEASIBLE


# ─── compare ──────────────────────────────────────────────────────────────────

def run_compare(args) -> int:
    from file_manager import write_report
    from orchestrator import COMPARE_FIELDS, compare
    from planners import plan_solve, SolveRequest

    algorithms = [a.strip() for a in args.algorithms.split(',') if a.strip()]
    if not algorithms:
        raise ValueError("--algorithms needs at least one name")
    for name in algorithms:
        plan_solve(SolveRequest(name, args.epsilon, args.delta, args.angle_margin))

    rows = compare(args.pattern, algorithms, args.epsilon, args.delta, args.angle_margin,
                   jobs=args.jobs, progress=not args.no_progress)

    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        with open(args.output, 'w', encoding='utf-8', newline='') as f:
            write_report(rows, f, COMPARE_FIELDS)
    else:
        write_report(rows, sys.stdout, COMPARE_FIELDS)

    failures = [r for r in rows if r['feasible'] == 'no']
    if args.min_ratio is not None:
        failures += [r for r in rows if r['ratio'] and float(r['ratio']) < args.min_ratio - 1e-12]
    errors = [r for r in rows if r['error']]

    _say(f"  {len(rows)} row(s), {len(errors)} error(s), {len(failures)} failure(s)")
    for row in failures:
        _say(f"  ❌ {row['instance']} {row['algorithm']}: feasible={row['feasible']} ratio={row['ratio']}")
    return EXIT_INFEASIBLE if failures else EXIT_OK


# ─── Entry point ──────────────────────────────────────────────────────────────

def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    from planners.solve_planner import DEFAULT_ANGLE_MARGIN, DEFAULT_DELTA, DEFAULT_EPSILON

    parser.add_argument('--epsilon', '-e', type=float, default=DEFAULT_EPSILON,
                        help=f'Accuracy parameter ε in (0, 1) (default: {DEFAULT_EPSILON}).')
    parser.add_argument('--delta', type=float, default=DEFAULT_DELTA,
                        help=f'Large/small split δ for ufp (default: {DEFAULT_DELTA}).')
    parser.add_argument('--angle-margin', type=float, default=DEFAULT_ANGLE_MARGIN,
                        help='fptas rejects instances with φ > π − margin '
                             f'(default: {DEFAULT_ANGLE_MARGIN}).')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='csp-sched',
        description='csp-sched — complex-demand scheduling under apparent-power capacities',
    )
    parser.add_argument('--verbose', '-v', action='count', default=0,
                        help='-v for solver progress, -vv for per-guess detail.')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='Write seeded random instances.')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--count', type=int, default=1,
                     help='Number of instances, seeds seed..seed+count-1 (needs --output DIR).')
    gen.add_argument('--n', type=int, default=6, help='Users per instance.')
    gen.add_argument('--max-prefs', type=int, default=3, help='Preferences per user, at most.')
    gen.add_argument('--m', type=int, default=1, help='Time slots.')
    gen.add_argument('--angle-max', type=float, default=math.pi / 2,
                     help='Largest demand argument in radians, below π (default: π/2).')
    gen.add_argument('--capacity-profile', choices=['constant', 'random', 'valley'], default='constant')
    gen.add_argument('--capacity-base', type=float, default=10.0)
    gen.add_argument('--magnitude-range', type=float, nargs=2, metavar=('LO', 'HI'), default=[0.1, 0.6],
                     help='Demand magnitude as a fraction of capacity.')
    gen.add_argument('--utility-model', choices=['proportional', 'uniform'], default='proportional')
    gen.add_argument('--elastic-fraction', type=float, default=0.0)
    gen.add_argument('--window-model', choices=['full', 'random-contiguous'], default='full')
    gen.add_argument('--demand-model', choices=['constant', 'varying'], default='constant')
    gen.add_argument('--output', '-o', metavar='PATH',
                     help='File (.json) or directory; stdout when omitted.')
    gen.set_defaults(handler=run_generate)

    solve = sub.add_parser('solve', help='Solve one instance.')
    solve.add_argument('instance', metavar='INSTANCE')
    solve.add_argument('--algorithm', '-a', required=True,
                       help='exact | greedy | greedy-sequential | fptas | ptas | ufp | mixed+<inner>')
    _add_solver_flags(solve)
    solve.add_argument('--normalize', action='store_true',
                       help='Rotate all demands so the smallest enclosing arc starts at angle 0.')
    solve.add_argument('--beta-report', action='store_true',
                       help='Print per-slot load against capacity.')
    solve.add_argument('--output', '-o', metavar='PATH', help='Solution JSON; stdout when omitted.')
    solve.add_argument('--report', metavar='CSV', help='Append the report row to this CSV file.')
    solve.set_defaults(handler=run_solve)

    verify = sub.add_parser('verify', help='Check a solution against an instance.')
    verify.add_argument('instance', metavar='INSTANCE')
    verify.add_argument('solution', metavar='SOLUTION')
    verify.add_argument('--beta', type=float, default=1.0,
                        help='Allowed capacity factor β ≥ 1 (default: 1).')
    verify.set_defaults(handler=run_verify)

    comp = sub.add_parser('compare', help='Run several algorithms over a glob of instances.')
    comp.add_argument('pattern', metavar='GLOB')
    comp.add_argument('--algorithms', default='exact,greedy',
                      help='Comma-separated algorithm list (default: exact,greedy).')
    _add_solver_flags(comp)
    comp.add_argument('--jobs', '-j', type=int, default=1, help='Worker processes.')
    comp.add_argument('--min-ratio', type=float, default=None,
                      help='Exit 1 if any ratio against exact falls below this.')
    comp.add_argument('--output', '-o', metavar='CSV', help='CSV table; stdout when omitted.')
    comp.add_argument('--no-progress', action='store_true', help='Hide the progress bar.')
    comp.set_defaults(handler=run_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(format='[%(name)s] %(message)s', level=level, stream=sys.stderr, force=True)

    try:
        return args.handler(args)
    except ResourceCapError as exc:
        _say(f"\n  ❌ {exc}")
        return EXIT_RESOURCE
    except (CspSchedError, ValueError) as exc:
        _say(f"\n  ❌ {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
