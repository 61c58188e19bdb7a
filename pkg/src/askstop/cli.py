"""Command-line entry point: ``askstop <subcommand> [flags]``.

Data goes to files and standard output, diagnostics to standard error.  Every
subcommand writes ``<output>.manifest.json`` holding the fully resolved
arguments and checksums of what it wrote, so a run can be repeated from its
manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .distfit import (
    cdf_table,
    default_tail_start,
    fit_invgauss_mle,
    integer_histogram,
    ks_statistic,
    loglog_table,
    tail_slope,
)
from .eventlog import filter_max_answers, filter_open_duration, load_log, save_log
from .expansion import design_matrix, expand_table, write_observations
from .logit import LogitFit, dumps_fit_records, fit_logit, format_fit_table
from .simulate import (
    ArrivalProcess,
    BellmanConfig,
    LogitAskerConfig,
    RandomWalkConfig,
    sample_brownian_passage,
    simulate_log,
    simulate_threshold_walk,
    solve_threshold,
)
from .stats import (
    answers_elapsed_correlation,
    close_stats_arrays,
    elapsed_by_count,
    format_tsv,
    open_duration_histogram,
)
from .utility import decompose_fit, utility_curve, utility_peak

log = logging.getLogger("askstop")


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(target: Path, command: str, args: argparse.Namespace, outputs: list[Path], **extra) -> Path:
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    manifest = {
        "tool": "askstop",
        "version": __version__,
        "command": command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in resolved.items()},
        "outputs": {p.name: _sha256(p) for p in outputs},
        **extra,
    }
    path = target.with_name(target.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- simulate / walk -------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.mode == "walk":
        return cmd_walk(args)
    missing = [f"--{k}" for k in ("alpha", "beta1", "beta2", "beta3") if getattr(args, k) is None]
    if missing:
        raise UsageError("logit mode needs " + ", ".join(missing))
    asker = LogitAskerConfig(
        args.alpha, args.beta1, args.beta2, args.beta3,
        check_interval_hours=args.interval_hours,
        horizon_hours=args.horizon_hours,
        random_phase=args.random_phase,
    )
    arrivals = ArrivalProcess.parse(args.arrival)
    event_log = simulate_log(asker, arrivals, args.questions, args.seed)
    out = save_log(event_log, args.out)
    total, _, _ = close_stats_arrays(event_log)
    summary = {
        "questions": len(event_log),
        "discarded": event_log.meta["discarded"],
        "mean_answers": float(total.mean()),
    }
    write_manifest(out, "simulate", args, [out], summary=summary)
    print(f"questions\t{summary['questions']}\ndiscarded\t{summary['discarded']}\nmean_answers\t{summary['mean_answers']:.4f}")
    return 0


def cmd_walk(args) -> int:
    for name in ("x0", "xstar"):
        if getattr(args, name) is None:
            raise UsageError(f"walk mode needs --{name}")
    cfg = RandomWalkConfig(
        args.x0, args.xstar, step_mean=args.drift, step_sd=args.sd,
        max_steps=args.max_steps, deterministic=args.deterministic,
    )
    result = simulate_threshold_walk(cfg, args.questions, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{c}\n" for c in result.counts), encoding="utf-8")
    summary = {
        "questions": len(result),
        "censored": int(result.censored.sum()),
        "mean_answers": float(result.counts.mean()),
    }
    write_manifest(out, "walk", args, [out], summary=summary)
    print(f"questions\t{summary['questions']}\ncensored\t{summary['censored']}\nmean_answers\t{summary['mean_answers']:.4f}")
    return 0


# -- fit -------------------------------------------------------------------


def _prepare_log(args):
    event_log = load_log(args.input, sort_on_ingest=args.sort_on_ingest)
    if args.max_open_hours is not None:
        event_log, removed = filter_open_duration(event_log, args.max_open_hours)
        log.info("removed %d questions open >= %g hours", removed, args.max_open_hours)
    if args.max_answers is not None:
        event_log, removed = filter_max_answers(event_log, args.max_answers)
        log.info("removed %d questions with >= %d answers", removed, args.max_answers)
    if len(event_log) == 0:
        raise UsageError("no questions left after filtering")
    return event_log


def _fit_log(event_log, args) -> LogitFit:
    table = expand_table(event_log, args.interval_hours, args.close_rule)
    if getattr(args, "observations_out", None):
        write_observations(table, args.observations_out)
    X, y = design_matrix(table)
    return fit_logit(X, y, ridge=args.ridge)


def cmd_fit(args) -> int:
    event_log = _prepare_log(args)
    fit = _fit_log(event_log, args)
    print(format_fit_table(fit))
    out = Path(args.out) if args.out else Path(str(args.input) + ".fit.jsonl")
    out.write_text(dumps_fit_records(fit), encoding="utf-8")
    outputs = [out]
    if args.observations_out:
        outputs.append(Path(args.observations_out))
    write_manifest(out, "fit", args, outputs, questions=len(event_log))
    return 0


def load_fit(path: str | Path) -> LogitFit:
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        row = json.loads(line)
        if row.get("term") == "_summary":
            return LogitFit.from_dict(row)
    raise UsageError(f"{path}: no summary record in fit file")


# -- report ----------------------------------------------------------------


def _section(title: str) -> str:
    return f"# {title}\n"


def _invgauss_sections(counts: np.ndarray, args, tables: dict[str, str], records: list[dict]) -> list[str]:
    out = []
    params = fit_invgauss_mle(counts)
    ks = ks_statistic(counts, params)
    out.append(_section("inverse Gaussian fit of answers per question (continuous density, no discreteness correction)"))
    out.append(f"mu\t{params.mu:.6g}\nlambda\t{params.lam:.6g}\nks\t{ks:.6g}\nn\t{counts.size}\n")
    records.append({"section": "invgauss", "mu": params.mu, "lambda": params.lam, "ks": ks, "n": int(counts.size)})
    hist = integer_histogram(counts)
    x_min = args.tail_min if args.tail_min is not None else default_tail_start(params)
    try:
        tail = tail_slope(hist, x_min, args.tail_min_count)
        out.append(_section("log-log tail slope"))
        out.append(
            f"slope\t{tail.slope:.6g}\nintercept\t{tail.intercept:.6g}\n"
            f"range\t{tail.fit_range[0]:g}-{tail.fit_range[1]:g}\npoints\t{tail.points_used}\n"
        )
        records.append({"section": "tail", "slope": tail.slope, "intercept": tail.intercept,
                        "x_min": tail.fit_range[0], "x_max": tail.fit_range[1], "points": tail.points_used})
    except ValueError as exc:
        out.append(_section("log-log tail slope"))
        out.append(f"unavailable\t{exc}\n")
        records.append({"section": "tail", "error": str(exc)})
    tables["invgauss_cdf.tsv"] = format_tsv(("x", "empirical_cdf", "fitted_cdf"), cdf_table(counts, params))
    tables["loglog_frequency.tsv"] = format_tsv(("log_x", "log_frequency"), loglog_table(hist))
    return out


def cmd_report(args) -> int:
    if not args.input and not args.counts:
        raise UsageError("report needs --in LOG or --counts FILE")
    source = Path(args.input or args.counts)
    out_dir = Path(args.out_dir) if args.out_dir else source.with_name(source.name + ".report")
    out_dir.mkdir(parents=True, exist_ok=True)
    text: list[str] = []
    tables: dict[str, str] = {}
    records: list[dict] = []

    if args.counts:
        counts = np.array([int(t) for t in Path(args.counts).read_text(encoding="utf-8").split()], dtype=float)
        text += _invgauss_sections(counts, args, tables, records)
    else:
        event_log = _prepare_log(args)
        corr = answers_elapsed_correlation(event_log)
        text.append(_section("correlation of TotalAnswers and ElapsedTime"))
        flag = "\tdegenerate" if corr.degenerate else ""
        text.append(
            f"r\t{corr.r:.3f}{corr.stars}\nci95\t[{corr.ci_low:.3f}, {corr.ci_high:.3f}]\n"
            f"p_value\t{corr.p_value:.3g}\nn\t{corr.n}{flag}\n"
        )
        records.append({"section": "correlation", "r": corr.r, "ci_low": corr.ci_low, "ci_high": corr.ci_high,
                        "p_value": corr.p_value, "n": corr.n, "stars": corr.stars})

        hist = open_duration_histogram(event_log, args.bin_hours)
        frac = hist.fraction_closed_within_24h
        text.append(_section("open duration"))
        text.append(f"fraction_closed_within_24h\t{'absent' if frac is None else format(frac, '.4f')}\n")
        records.append({"section": "open_duration", "fraction_closed_within_24h": frac, "bin_hours": args.bin_hours})
        tables["open_duration_histogram.tsv"] = format_tsv(("bin_start", "count"), hist.bins)

        ebc = elapsed_by_count(event_log, args.max_n)
        tables["elapsed_by_count.tsv"] = format_tsv(("n", "mean_elapsed_hours", "count"), ebc.rows)
        text.append(_section(f"mean ElapsedTime by TotalAnswers (n <= {args.max_n})"))
        text.append(tables["elapsed_by_count.tsv"])
        text.append(f"spearman_trend\t{ebc.spearman_trend():.4f}\n")
        records.append({"section": "elapsed_by_count", "rows": ebc.rows, "spearman_trend": ebc.spearman_trend()})

        total, _, _ = close_stats_arrays(event_log)
        text += _invgauss_sections(total.astype(float), args, tables, records)

        if args.alpha_u:
            fit = load_fit(args.fit) if args.fit else _fit_log(event_log, args)
            text.append(_section("logit fit"))
            text.append(format_fit_table(fit) + "\n")
            for a_u in args.alpha_u:
                um, cm = decompose_fit(fit, a_u)
                name = f"utility_alpha_u_{a_u:g}.tsv"
                tables[name] = format_tsv(("n", "u"), utility_curve(um, args.n_max))
                try:
                    peak = utility_peak(um)
                except ValueError:
                    peak = None
                text.append(_section(f"utility curve alpha_u={a_u:g} (alpha_c={cm.alpha_c:.4f}, peak n={peak})"))
                text.append(tables[name])
                records.append({"section": "utility", "alpha_u": a_u, "alpha_c": cm.alpha_c, "beta1": um.beta1,
                                "peak": peak, "n_max": args.n_max})

    report = "".join(part if part.endswith("\n") else part + "\n" for part in text)
    sys.stdout.write(report)
    outputs = []
    (out_dir / "report.txt").write_text(report, encoding="utf-8")
    outputs.append(out_dir / "report.txt")
    (out_dir / "report.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")
    outputs.append(out_dir / "report.jsonl")
    for name, body in sorted(tables.items()):
        (out_dir / name).write_text(body, encoding="utf-8")
        outputs.append(out_dir / name)
    write_manifest(out_dir / "report", "report", args, outputs)
    return 0


# -- threshold solver / sampler ---------------------------------------------


def cmd_solve_threshold(args) -> int:
    cfg = BellmanConfig(
        discount=args.discount, x_min=args.x_min, x_max=args.x_max, dx=args.dx,
        step_mean=args.drift, step_sd=args.sd, tol=args.tol,
    )
    sol = solve_threshold(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_tsv(("x", "value", "continuation"), zip(sol.grid, sol.values, sol.continuation)), encoding="utf-8")
    label = "always_stop" if sol.always_stop else f"{sol.x_star:.6g}"
    print(f"x_star\t{label}\niterations\t{sol.iterations}")
    write_manifest(out, "solve-threshold", args, [out],
                   x_star=None if sol.always_stop else sol.x_star, iterations=sol.iterations)
    return 0


def cmd_sample_ig(args) -> int:
    draws = sample_brownian_passage(args.mu, args.lam, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{x!r}\n" for x in draws.tolist()), encoding="utf-8")
    if draws.size:
        print(f"mean\t{draws.mean():.6g}\nvariance\t{draws.var(ddof=1) if draws.size > 1 else math.nan:.6g}")
    write_manifest(out, "sample-ig", args, [out])
    return 0


# -- parser ----------------------------------------------------------------


def _add_log_input(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--in", dest="input", required=required, help="event log (line-delimited JSON)")
    p.add_argument("--sort-on-ingest", action="store_true", help="sort unordered answer offsets instead of failing")
    p.add_argument("--max-open-hours", type=float, default=None, help="keep questions closed before this many hours")
    p.add_argument("--max-answers", type=int, default=None, help="keep questions with fewer answers than this")


def _add_fit_options(p: argparse.ArgumentParser):
    p.add_argument("--interval-hours", type=float, default=1.0, help="assumed asker check interval")
    p.add_argument("--close-rule", choices=("exact", "grid"), default="exact",
                   help="closing row at the recorded close time, or at the first grid visit after it")
    p.add_argument("--ridge", type=float, default=None, help="exploratory L2 penalty (e.g. 1e-6)")


def _add_walk_options(p: argparse.ArgumentParser):
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--xstar", type=float, default=None)
    p.add_argument("--drift", type=float, default=-0.5)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--deterministic", action="store_true", help="constant steps equal to --drift")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="askstop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic event log (or walk counts with --mode walk)")
    p.add_argument("--mode", choices=("logit", "walk"), default="logit")
    p.add_argument("--questions", type=_positive_int, required=True)
    for name in ("alpha", "beta1", "beta2", "beta3"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--arrival", default="poisson:0.25", help="poisson:RATE or lognormal:M,S")
    p.add_argument("--interval-hours", type=float, default=1.0)
    p.add_argument("--horizon-hours", type=float, default=1000.0)
    p.add_argument("--random-phase", action="store_true", help="offset each asker's check grid randomly")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_walk_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("walk", help="answers-per-question counts from the threshold random walk")
    p.add_argument("--questions", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_walk_options(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("fit", help="expand a log into visits and fit the closing logit")
    _add_log_input(p)
    _add_fit_options(p)
    p.add_argument("--out", default=None, help="fit records (default <in>.fit.jsonl)")
    p.add_argument("--observations-out", default=None, help="also write the visit rows as TSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="descriptive tables, inverse Gaussian fit and utility curves")
    _add_log_input(p, required=False)
    _add_fit_options(p)
    p.add_argument("--counts", default=None, help="answers-per-question counts, one integer per line")
    p.add_argument("--fit", default=None, help="fit file from `askstop fit` (otherwise fitted here)")
    p.add_argument("--alpha-u", type=_float_list, default=None, help="comma-separated utility intercepts")
    p.add_argument("--n-max", type=int, default=50)
    p.add_argument("--max-n", type=int, default=18, help="largest TotalAnswers in the elapsed-time table")
    p.add_argument("--bin-hours", type=float, default=1.0)
    p.add_argument("--tail-min", type=int, default=None, help="tail fit start (default ceil(mu))")
    p.add_argument("--tail-min-count", type=int, default=5)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("solve-threshold", help="value iteration for the stopping threshold")
    p.add_argument("--discount", type=float, default=0.9)
    p.add_argument("--x-min", type=float, default=-20.0)
    p.add_argument("--x-max", type=float, default=40.0)
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--sd", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_threshold)

    p = sub.add_parser("sample-ig", help="exact inverse Gaussian first-passage draws")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_ig)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"askstop {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"askstop {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
