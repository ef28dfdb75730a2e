"""Command-line interface: ``fwerkit <subcommand> [options]``.

Data goes to stdout (or ``--output``); diagnostics, including the effective
seed of randomized commands, go to stderr. Exit status is 0 on success, 1 on
input or validation errors, 2 on internal faults.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from typing import Optional, Sequence

from .core import adjust
from .errors import InputError, PlanValidationError
from .formats import parse_datamatrix_csv, parse_plan, parse_pvalue_csv, render_result
from .hierarchy import FallbackPlan, GatePlan, fallback_test, gatekeep_test
from .replication import TABLES, replicate
from .resample import ResamplingSpec, wy_minp_adjust
from .simulate import PROCEDURES, SimulationConfig, compare_procedures, default_family_sizes

SEED_ENV = "FWERKIT_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0.0 <= value <= 1.0):
        raise argparse.ArgumentTypeError(f"must be in [0, 1]: {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer: {text!r}") from None
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _effects(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"effects must be a comma list of numbers: {text!r}") from None


def _common(p: argparse.ArgumentParser, alpha_default: Optional[float] = 0.05, output_formats=True):
    p.add_argument("--alpha", type=_unit_interval, default=alpha_default,
                   help=f"family-wise significance level (default {alpha_default})")
    p.add_argument("--output", help="write results to this file instead of stdout")
    if output_formats:
        p.add_argument("--format", choices=("csv", "pretty"), default="csv", help="output format (default csv)")
        p.add_argument("--decimals", type=int, default=3, help="decimals printed (default 3)")


def _resampling_flags(p: argparse.ArgumentParser, default_B: int = 10_000):
    p.add_argument("--B", type=int, default=default_B, help=f"number of resamples (default {default_B})")
    p.add_argument("--scheme", choices=("permutation", "bootstrap", "exhaustive"), default="permutation",
                   help="resampling scheme (default permutation)")
    p.add_argument("--statistic", choices=("mean-difference", "t-welch"), default="mean-difference",
                   help="test statistic (default mean-difference)")
    p.add_argument("--seed", type=_seed, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fwerkit", description="Family-wise error rate control for multiple hypotheses.")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("adjust", help="adjust one family of p-values",
                       description="Adjust a family of p-values (CSV with hypothesis_id,p_value).")
    p.add_argument("--method", choices=("bonferroni", "holm", "hochberg", "sidak-holm"), default="holm",
                   help="adjustment method (default holm)")
    p.add_argument("--input", required=True, help="p-value CSV file")
    _common(p)

    p = sub.add_parser("fallback", help="fallback procedure with alpha propagation",
                       description="Run the fallback procedure. The plan supplies order and weights; without "
                                   "--plan the CSV's weight (and order) columns are used.")
    p.add_argument("--input", required=True, help="p-value CSV file")
    p.add_argument("--plan", help="fallback plan (JSON)")
    _common(p, alpha_default=None)

    p = sub.add_parser("gatekeep", help="serial or parallel gatekeeping over families",
                       description="Run a gatekeeping plan over ordered families of hypotheses.")
    p.add_argument("--input", required=True, help="p-value CSV file")
    p.add_argument("--plan", required=True, help="gatekeeping plan (JSON)")
    p.add_argument("--data", help="data matrix CSV (needed for intra_method westfall_young)")
    _resampling_flags(p)
    _common(p, alpha_default=None)

    p = sub.add_parser("wy", help="Westfall-Young min-p adjustment from unit-level data",
                       description="Westfall-Young free step-down adjusted p-values from a data matrix CSV "
                                   "(unit_id, group in {0,1}, one column per outcome).")
    p.add_argument("--input", required=True, help="data matrix CSV file")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (output does not depend on this)")
    _resampling_flags(p)
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo FWER / power estimate",
                       description="Estimate FWER and per-hypothesis rejection rates by simulation.")
    p.add_argument("--procedure", default="bonferroni",
                   help="procedure name, or a comma list for a paired comparison: " + ", ".join(PROCEDURES))
    p.add_argument("--effects", type=_effects, help="comma list of effects (0 = true null)")
    p.add_argument("--m", type=int, help="number of hypotheses when --effects is omitted (all null)")
    p.add_argument("--rho", type=float, default=0.0, help="equicorrelation of the test statistics (default 0)")
    p.add_argument("--reps", type=int, default=10_000, help="replications (default 10000)")
    p.add_argument("--plan", help="fallback or gatekeeping plan; weights / family sizes are taken in order")
    p.add_argument("--n-units", type=int, default=40, help="units per replication for westfall-young")
    _resampling_flags(p, default_B=500)
    _common(p)

    p = sub.add_parser("replicate", help="recompute a published Piso Firme table",
                       description="Recompute a published table from the shipped fixtures and compare cell by cell.")
    p.add_argument("--table", required=True, choices=TABLES, help="table id")
    p.add_argument("--model", type=int, choices=(1, 2, 3), default=3, help="model specification (default 3)")
    p.add_argument("--output", help="write the comparison to this file instead of stdout")
    return parser


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _with_context(path: str, fn, text: str):
    try:
        return fn(text)
    except PlanValidationError as exc:
        raise PlanValidationError([f"{path}: {v}" for v in exc.violations]) from None
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _effective_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return _seed(env)
        except argparse.ArgumentTypeError as exc:
            raise InputError(f"${SEED_ENV}: {exc}") from None
    return 0


def _spec(args, seed: int) -> ResamplingSpec:
    return ResamplingSpec(args.scheme, args.B, seed, args.statistic.replace("-", "_"))


def _cmd_adjust(args) -> str:
    table = _with_context(args.input, parse_pvalue_csv, _read(args.input)).table
    return render_result(adjust(table, args.method, args.alpha), args.format, args.decimals)


def _cmd_fallback(args) -> str:
    parsed = _with_context(args.input, parse_pvalue_csv, _read(args.input))
    if args.plan:
        plan = _with_context(args.plan, parse_plan, _read(args.plan))
        if not isinstance(plan, FallbackPlan):
            raise InputError(f"{args.plan}: not a fallback plan")
        if args.alpha is not None and args.alpha != plan.alpha:
            raise InputError(f"--alpha {args.alpha} conflicts with the plan's alpha {plan.alpha}")
    else:
        plan = parsed.fallback_plan(0.05 if args.alpha is None else args.alpha)
    return render_result(fallback_test(plan, parsed.table), args.format, args.decimals)


def _cmd_gatekeep(args) -> str:
    table = _with_context(args.input, parse_pvalue_csv, _read(args.input)).table
    plan = _with_context(args.plan, parse_plan, _read(args.plan))
    if not isinstance(plan, GatePlan):
        raise InputError(f"{args.plan}: not a gatekeeping plan")
    if args.alpha is not None and args.alpha != plan.alpha:
        raise InputError(f"--alpha {args.alpha} conflicts with the plan's alpha {plan.alpha}")
    ctx = None
    if plan.intra_method == "westfall_young":
        if not args.data:
            raise InputError("intra_method westfall_young needs --data")
        seed = _effective_seed(args)
        print(f"seed: {seed}", file=sys.stderr)
        ctx = (_with_context(args.data, parse_datamatrix_csv, _read(args.data)), _spec(args, seed))
    return render_result(gatekeep_test(plan, table, ctx), args.format, args.decimals)


def _cmd_wy(args) -> str:
    data = _with_context(args.input, parse_datamatrix_csv, _read(args.input))
    seed = _effective_seed(args)
    print(f"seed: {seed}", file=sys.stderr)
    result = wy_minp_adjust(data, _spec(args, seed), n_jobs=args.jobs)
    for e in result.entries:
        if e.error:
            print(f"warning: outcome {e.outcome!r} skipped: {e.error}", file=sys.stderr)
    return render_result(result, args.format, args.decimals)


def _cmd_simulate(args) -> str:
    seed = _effective_seed(args)
    print(f"seed: {seed}", file=sys.stderr)
    procedures = [p.strip().lower().replace("-", "_") for p in args.procedure.split(",") if p.strip()]
    if args.effects:
        effects = args.effects
    elif args.m:
        effects = (0.0,) * args.m
    else:
        raise InputError("give --effects or --m")
    m = len(effects)
    weights = family_sizes = None
    gate_mode, intra = "serial", "holm"
    if args.plan:
        plan = _with_context(args.plan, parse_plan, _read(args.plan))
        if isinstance(plan, FallbackPlan):
            if len(plan.steps) != m:
                raise InputError(f"plan has {len(plan.steps)} steps but there are {m} hypotheses")
            weights = plan.weights
        else:
            family_sizes = tuple(len(f.members) for f in plan.families)
            if sum(family_sizes) != m:
                raise InputError(f"plan covers {sum(family_sizes)} hypotheses but there are {m}")
            gate_mode, intra = plan.mode, plan.intra_method
    config = SimulationConfig(
        m=m, effects=effects, rho=args.rho, n_reps=args.reps, alpha=args.alpha, seed=seed,
        procedure=procedures[0] if procedures else "", weights=weights,
        family_sizes=family_sizes or default_family_sizes(m), gate_mode=gate_mode, intra_method=intra,
        n_units=args.n_units, resampling=ResamplingSpec(args.scheme, args.B, 0, args.statistic.replace("-", "_")),
    )
    reports = list(compare_procedures(config, procedures).values())
    if reports:
        print(f"runtime: {reports[0].runtime_s:.2f} s", file=sys.stderr)
    return _render_reports(reports, args.format, args.decimals)


def _render_reports(reports, fmt: str, decimals: int) -> str:
    # runtime is left out so reruns are byte-identical
    f = lambda x: f"{x:.{decimals}f}"  # noqa: E731
    ids = reports[0].config.ids if reports else ()
    header = ["procedure", "n_reps", "alpha", "rho", "empirical_fwer", "fwer_ci_low", "fwer_ci_high",
              "any_rejection"] + [f"reject_{h}" for h in ids]
    rows = []
    for r in reports:
        lo, hi = r.fwer_interval
        rows.append([r.procedure, str(r.n_reps), f(r.config.alpha), f(r.config.rho), f(r.empirical_fwer),
                     f(lo), f(hi), f(r.any_rejection_rate)] + [f(x) for x in r.rejection_rates])
    if fmt == "pretty":
        widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
        out = ["  ".join(c.ljust(w) for c, w in zip(header, widths)).rstrip(),
               "  ".join("-" * w for w in widths)]
        out += ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))).rstrip()
                for row in rows]
        return "\n".join(out) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _cmd_replicate(args) -> str:
    return replicate(args.table, args.model).render()


COMMANDS = {
    "adjust": _cmd_adjust,
    "fallback": _cmd_fallback,
    "gatekeep": _cmd_gatekeep,
    "wy": _cmd_wy,
    "simulate": _cmd_simulate,
    "replicate": _cmd_replicate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = COMMANDS[args.command](args)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except InputError as exc:
        print(f"fwerkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"fwerkit {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
