"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 bad arguments,
3 optimizer failure. Numbers are printed with 9 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import iid, periodic, statechannel, verifier
from .numerics import ConvergenceError

EXIT_OK, EXIT_VERIFY, EXIT_ARGS, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def fmt(v: float) -> str:
    return f"{v:.9g}"


def parse_grid(text: str) -> list[float]:
    try:
        lo, step, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like lo:step:hi, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise UsageError(f"bad grid {text!r}")
    return periodic.default_grid(lo, step, hi)


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def render(record: dict, form: str) -> str:
    if form == "json":
        return json.dumps(record, sort_keys=True) + "\n"
    keys = list(record)
    return ",".join(keys) + "\n" + ",".join(
        fmt(record[k]) if isinstance(record[k], float) else str(record[k]) for k in keys) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_capacity(args) -> int:
    if args.mode == "periodic":
        rec = {"alpha": args.alpha,
               "C_ff": periodic.capacity_ff(args.alpha).value,
               "C_fb": periodic.capacity_fb_closed(args.alpha).value}
    else:
        if args.p is None:
            raise UsageError("capacity iid needs --p")
        spec = iid.SeriesSpec(args.p, args.alpha, args.tol, args.kmax)
        ff = iid.series_capacity(spec, feedback=False)
        fb = iid.series_capacity(spec, feedback=True)
        rec = {"alpha": args.alpha, "p": args.p, "C": ff.value, "C_fb": fb.value,
               "gap": fb.value - ff.value, "N_used": ff.details["N_used"],
               "tail_bound": ff.details["tail_bound"]}
        if ff.details["partial"]:
            rec["partial"] = True
    if args.format == "json":
        rec = {k: float(fmt(v)) if isinstance(v, float) else v for k, v in rec.items()}
    emit(render(rec, args.format), args.out)
    if rec.get("partial"):
        # tail bound above --tol: reported, but not a converged answer
        print("ehbec: series truncated at --kmax; tail bound exceeds --tol", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_curve(args) -> int:
    rows = periodic.capacity_curve(parse_grid(args.grid))
    if args.format == "csv":
        text = periodic.curve_to_csv(rows)
    else:
        text = json.dumps([{"alpha": float(fmt(r.alpha)), "C_ff": float(fmt(r.c_ff)),
                            "C_fb": float(fmt(r.c_fb))} for r in rows]) + "\n"
    emit(text, args.out)
    return EXIT_OK


def cmd_statechannel(args) -> int:
    p_grid = [args.p] if args.p is not None else parse_grid(args.p_grid)
    a_grid = [args.alpha] if args.alpha_given else parse_grid(args.grid)
    rows = statechannel.state_gap_scan(p_grid, a_grid)
    if args.format == "csv":
        text = statechannel.gap_table_to_csv(rows)
    else:
        text = json.dumps([{"p": float(fmt(r.p)), "alpha": float(fmt(r.alpha)),
                            "C": float(fmt(r.c)), "C_fb": float(fmt(r.c_fb)),
                            "gap": float(fmt(r.gap))} for r in rows]) + "\n"
    emit(text, args.out)
    return EXIT_OK


def cmd_epoch_rate(args) -> int:
    if args.kmax < 1 or args.kmax > iid.FB_TREE_MAX_K:
        raise UsageError(f"--kmax must lie in 1..{iid.FB_TREE_MAX_K}")
    dp = iid.BeliefDP.build(args.alpha, args.kmax)
    rows = []
    for k in range(1, args.kmax + 1):
        rows.append({"k": k,
                     "rate_ff": iid.per_epoch_rate(k, args.alpha, False),
                     "rate_fb": iid.per_epoch_rate(k, args.alpha, True, seed=args.seed, dp=dp),
                     "bound": k * (1.0 - args.alpha)})
    if args.format == "csv":
        text = "k,rate_ff,rate_fb,bound\n" + "".join(
            f"{r['k']},{fmt(r['rate_ff'])},{fmt(r['rate_fb'])},{fmt(r['bound'])}\n" for r in rows)
    else:
        text = json.dumps([{k: float(fmt(v)) if isinstance(v, float) else v for k, v in r.items()}
                           for r in rows]) + "\n"
    emit(text, args.out)
    return EXIT_OK


ORACLE_TOL = 1e-5
ORACLE_BLOCK_TOL = 1e-4


def suite_oracle(alpha: float, seed: int) -> verifier.SimReport:
    rep = verifier.SimReport("oracle", 0, seed, details={"alpha": alpha})
    mi2 = verifier.brute_force_mi(2, alpha)
    di2 = verifier.brute_force_di(2, alpha, seed=seed)
    mi4 = verifier.brute_force_mi(4, alpha)
    rep.add("brute_force_mi(2)=capacity_ff", mi2, periodic.capacity_ff(alpha).value, 0.0, ORACLE_TOL)
    rep.add("brute_force_di(2)=capacity_fb_closed", di2, periodic.capacity_fb_closed(alpha).value,
            0.0, ORACLE_TOL)
    rep.add("brute_force_mi(4)=brute_force_mi(2)", mi4, mi2, 0.0, ORACLE_BLOCK_TOL)
    rep.add_at_least("brute_force_di(2)>=brute_force_mi(2)", di2, mi2 - 1e-9, 0.0)
    return rep


def suite_montecarlo(alpha: float, seed: int, samples: int) -> list[verifier.SimReport]:
    ff = verifier.simulate_channel(verifier.BlockInputLaw.uniform(2), alpha, samples, seed)
    ff.kind = "channel_uniform"
    law = verifier.solve_block_di(2, alpha, seed=seed).maximizer
    fb = verifier.simulate_channel(law, alpha, samples, seed + 1)
    fb.kind = "channel_feedback"
    return [ff, fb]


def cmd_verify(args) -> int:
    suites = ("oracle", "montecarlo", "typicality") if args.suite == "all" else (args.suite,)
    reports = []
    for name in suites:
        if name == "oracle":
            reports.append(suite_oracle(args.alpha, args.seed))
        elif name == "montecarlo":
            reports.extend(suite_montecarlo(args.alpha, args.seed, args.samples))
        elif args.suite == "typicality":
            reports.append(verifier.epoch_typicality_check(args.p_or(0.5), args.n, args.epsilon,
                                                           args.cap, args.seed))
        else:
            reports.append(verifier.typicality_frequency(args.p_or(0.5), args.n, args.epsilon,
                                                         args.cap, args.seeds, args.seed))
    out_dir = Path(args.out or "verify_reports")
    failed = []
    for rep in reports:
        write_atomic(out_dir / f"{rep.kind}.json", rep.to_json() + "\n")
        for c in rep.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {rep.kind}: {c.name} "
                  f"empirical={fmt(c.empirical)} reference={fmt(c.analytic)}")
            if not c.passed:
                failed.append(f"{rep.kind}: {c.name}")
    if failed:
        print("failed invariants: " + "; ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    print(f"all {sum(len(r.checks) for r in reports)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ARGS)


def _alpha(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1], got {text}")
    return v


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in (0, 1], got {text}")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ehbec", description="Capacities of the energy-harvesting BEC with a unit battery.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, alpha_default=0.5, form="json"):
        p.add_argument("--alpha", type=_alpha, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=form)
        p.set_defaults(alpha_default=alpha_default)

    p = sub.add_parser("capacity", help="single capacity values")
    p.add_argument("mode", choices=("periodic", "iid"))
    p.add_argument("--p", type=_prob, default=None)
    p.add_argument("--tol", type=_positive, default=1e-6)
    p.add_argument("--kmax", type=int, default=200)
    common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("curve", help="C_ff and C_fb over an alpha grid (CSV)")
    p.add_argument("--grid", default="0:0.01:1")
    common(p, form="csv")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("statechannel", help="gap table of the i.i.d.-state illustration")
    p.add_argument("--p", type=lambda s: float(s), default=None)
    p.add_argument("--p-grid", default="0:0.1:1")
    p.add_argument("--grid", default="0:0.1:1", help="alpha grid lo:step:hi")
    common(p, form="csv")
    p.set_defaults(func=cmd_statechannel)

    p = sub.add_parser("epoch-rate", help="per-epoch rates with and without feedback")
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    common(p, form="csv")
    p.set_defaults(func=cmd_epoch_rate)

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("suite", choices=("oracle", "montecarlo", "typicality", "all"))
    p.add_argument("--p", type=_prob, default=None)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--epsilon", type=_positive, default=0.05)
    p.add_argument("--cap", type=int, default=8, help="epoch-length cap N for typicality")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.alpha_given = args.alpha is not None
    if args.alpha is None:
        args.alpha = args.alpha_default
    args.p_or = lambda d: args.p if args.p is not None else d
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"ehbec: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"ehbec: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ValueError as exc:
        print(f"ehbec: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
