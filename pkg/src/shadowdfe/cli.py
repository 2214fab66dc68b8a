"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 state/target mismatch, 4 I/O or
malformed input file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .baseline import RepetitionOverflowError, baseline_config, baseline_estimate, vanilla_shadow_estimate
from .bench import (
    METHODS,
    BenchConfig,
    BenchError,
    aggregate,
    aggregate_by_fidelity,
    run_bench,
    write_fidelity_breakdown,
    write_records,
    write_summary,
)
from .linalg import DensityError, DimensionOverflowError, load_state, save_state
from .measurement import MeasuredState
from .rng import make_rng
from .shadow import ErrorBudget, dicke_coefficients, estimate, plan
from .states import GHZ, Basis, Dicke, W, fidelity, random_state_with_fidelity

EXIT_USAGE = 2
EXIT_MISMATCH = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _n_range(text: str) -> range:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"empty or invalid range {text!r}")
    return range(lo, hi + 1)


def _grid(text: str) -> tuple:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP:STEP, got {text!r}") from None
    return (start, stop, step)


def _methods(text: str) -> tuple:
    items = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in items if m not in METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return items


def _add_target_flags(p, with_n=True):
    p.add_argument("--target", required=True, choices=("ghz", "w", "dicke", "basis"))
    if with_n:
        p.add_argument("--n", type=_positive_int)
    p.add_argument("--k", type=int)
    p.add_argument("--b", help="bitstring for the basis target")


def _make_target(parser, args, n):
    if args.k is not None and args.target != "dicke":
        parser.error("--k is only valid with --target dicke")
    if args.b is not None and args.target != "basis":
        parser.error("--b is only valid with --target basis")
    if args.target == "basis":
        if args.b is None:
            parser.error("--target basis requires --b")
        if n is not None and len(args.b) != n:
            parser.error("--b length must equal --n")
        try:
            return Basis(args.b)
        except ValueError as exc:
            parser.error(str(exc))
    if n is None:
        parser.error("--n is required")
    if args.target == "ghz":
        return GHZ(n)
    if args.target == "w":
        return W(n)
    if args.k is None:
        parser.error("--target dicke requires --k")
    if not 0 <= args.k <= n:
        parser.error(f"--k must lie in [0, n], got {args.k}")
    return Dicke(n, args.k)


def _budget(parser, args) -> ErrorBudget:
    try:
        return ErrorBudget(args.epsilon, args.delta)
    except ValueError as exc:
        parser.error(str(exc))


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def cmd_gen_state(parser, args) -> int:
    target = _make_target(parser, args, args.n)
    rho = random_state_with_fidelity(target, args.fidelity, args.seed)
    try:
        save_state(rho, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    _emit({"out": str(args.out), "n": rho.n, "fidelity": fidelity(rho, target)})
    return 0


def cmd_estimate(parser, args) -> int:
    budget = _budget(parser, args)
    try:
        rho = load_state(args.state)
    except (OSError, ValueError, DensityError) as exc:
        raise CliError(f"cannot read state {args.state}: {exc}", EXIT_IO) from exc
    target = _make_target(parser, args, args.n if args.n is not None else rho.n)
    if target.n != rho.n:
        raise CliError(f"state has {rho.n} qubits but target has {target.n}", EXIT_MISMATCH)
    try:
        protocol = plan(target, budget, args.counts)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from exc
    state = MeasuredState(rho)
    if args.method == "shadow":
        res = estimate(state, protocol, args.seed, n_samples=args.n_samples, threads=args.threads)
        value, used = res.estimate, res.samples_used
    elif args.method == "baseline":
        res = baseline_estimate(state, target, baseline_config(target, budget), make_rng(args.seed))
        value, used = res.estimate, res.measurements_used
    else:
        used = args.n_samples if args.n_samples is not None else protocol.N
        value = vanilla_shadow_estimate(state, target, used, make_rng(args.seed))
    _emit({"estimate": value, "measurements": int(used), "method": args.method, "plan_n": protocol.N})
    return 0


def cmd_bench(parser, args) -> int:
    budget = _budget(parser, args)
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}", EXIT_IO) from exc
    records = []
    for n in args.n_range:
        target = _make_target(parser, args, n)
        try:
            cfg = BenchConfig(target, budget, grid=args.grid, trials=args.trials, seed=args.seed,
                              methods=args.methods, counts=args.counts, threads=args.threads)
        except ValueError as exc:
            parser.error(str(exc))

        def progress(done, total, n=n):
            if done == total or done % max(1, total // 20) == 0:
                print(f"[bench] {target.label} n={n}: {done}/{total}", file=sys.stderr, flush=True)

        try:
            records.extend(run_bench(cfg, progress))
        except BenchError as exc:
            raise CliError(str(exc), EXIT_MISMATCH) from exc
    try:
        write_records(records, out_dir / "results.csv")
        write_summary(aggregate(records), out_dir / "summary.json")
        write_fidelity_breakdown(aggregate_by_fidelity(records), out_dir / "per_fidelity.csv")
    except OSError as exc:
        raise CliError(f"cannot write results: {exc}", EXIT_IO) from exc
    return 0


def cmd_coeffs(parser, args) -> int:
    if not 0 <= args.k <= args.n:
        parser.error(f"--k must lie in [0, n], got k={args.k}, n={args.n}")
    co = dicke_coefficients(args.n, args.k)
    out = {"c": {str(l): c for l, c in co.c.items()}, "S": co.S, "plan_n_for": None}
    if args.epsilon is not None or args.delta is not None:
        if args.epsilon is None or args.delta is None:
            parser.error("--epsilon and --delta must be given together")
        budget = _budget(parser, args)
        out["plan_n_for"] = {"epsilon": budget.epsilon, "delta": budget.delta,
                             "N": plan(Dicke(args.n, args.k), budget).N}
    _emit(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowdfe", description="Pauli-measurement direct fidelity estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    threads_default = os.cpu_count() or 1

    p = sub.add_parser("gen-state", help="write a random state with a given fidelity")
    _add_target_flags(p)
    p.add_argument("--fidelity", type=_unit_interval, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_state)

    p = sub.add_parser("estimate", help="estimate the fidelity of a stored state")
    p.add_argument("--state", required=True)
    _add_target_flags(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--method", choices=METHODS, default="shadow")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-samples", type=_positive_int)
    p.add_argument("--counts", choices=("equation", "pseudocode"), default="equation")
    p.add_argument("--threads", type=_positive_int, default=threads_default)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="matched-budget MSE comparison")
    _add_target_flags(p, with_n=False)
    p.add_argument("--n-range", type=_n_range, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", type=_grid, default=(0.0, 1.0, 0.01))
    p.add_argument("--methods", type=_methods, default=METHODS)
    p.add_argument("--counts", choices=("equation", "pseudocode"), default="equation")
    p.add_argument("--threads", type=_positive_int, default=threads_default)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("coeffs", help="Dicke pair counts and normaliser")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.set_defaults(func=cmd_coeffs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except CliError as exc:
        print(f"shadowdfe: error: {exc}", file=sys.stderr)
        return exc.code
    except (DimensionOverflowError, RepetitionOverflowError) as exc:
        print(f"shadowdfe: error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
