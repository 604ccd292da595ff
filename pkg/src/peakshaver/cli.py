"""Command line harness: ``generate``, ``run`` and ``sweep``.

Exit codes: 0 ok, 1 usage, 2 invalid config or instance, 3 I/O, 4 failed
verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .baseline import PreconditionError, run_greedy_rtl
from .gen import ConfigError, GenConfig, generate_instance
from .metrics import (
    bound_or_none,
    compute_metrics,
    csv_columns,
    csv_row,
    format_csv,
    verify_bound,
    verify_dual_feasibility,
    verify_primal_feasibility,
)
from .model import InvalidInstanceError, UnboundedRatioError, load_instance, validate_instance
from .oracle import DEFAULT_LIMIT, InstanceTooLargeError, brute_force_opt, min_peak_among_optimal
from .scheduler import run_scs

log = logging.getLogger("peakshaver")

EXIT_USAGE, EXIT_INVALID, EXIT_IO, EXIT_VERIFY = 1, 2, 3, 4
ENGINES = ("scs", "greedy-rtl")
SWEEP_PARAMS = {"evs": "evs", "ctotal": "global_cap", "slackness": "slackness"}
SWEEP_EXTRA = ["param", "value", "seed", "pseudo_opt_peak"]


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _windows(text: str):
    out = []
    for part in text.split(","):
        a, _, b = part.partition("-")
        out.append((int(a), int(b or a)))
    return tuple(out)


def _floats(text: str):
    return tuple(float(x) for x in text.split(","))


def parse_values(text: str) -> list[float]:
    """``10,20,30`` or an inclusive range ``start..stop[:step]`` (step defaults to 1)."""
    if ".." in text:
        span, _, step = text.partition(":")
        start, _, stop = span.partition("..")
        a, b, h = float(start), float(stop), float(step or 1)
        if h <= 0:
            raise ValueError("range step must be positive")
        count = int(math.floor((b - a) / h + 1e-9)) + 1
        return [a + k * h for k in range(max(count, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


def _add_config_flags(p):
    g = p.add_argument_group("instance generation")
    g.add_argument("--config", help="JSON file with GenConfig fields; flags override it")
    g.add_argument("--horizon", type=int)
    g.add_argument("--stations", type=int)
    g.add_argument("--evs", type=int)
    g.add_argument("--local-cap", type=_floats,
                   help="one cap for all stations or a comma list (default: global cap / stations)")
    g.add_argument("--global-cap", type=float)
    g.add_argument("--slackness", type=float)
    g.add_argument("--rate-range", type=_floats, help="k_min,k_max")
    g.add_argument("--windows", type=_windows, help="deadline windows, e.g. 7-9,12-14,16-19")
    g.add_argument("--window-weights", type=_floats)
    g.add_argument("--price-range", type=_floats, help="u_min,u_max")


def config_from_args(args) -> GenConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", EXIT_IO)
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}", EXIT_INVALID)
    flags = {
        "horizon": args.horizon, "stations": args.stations, "evs": args.evs,
        "global_cap": args.global_cap, "slackness": args.slackness,
        "windows": args.windows, "window_weights": args.window_weights,
    }
    if args.rate_range is not None:
        flags["rate_range"] = tuple(int(x) for x in args.rate_range)
    if args.price_range is not None:
        flags["price_range"] = args.price_range
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.local_cap is not None:
        caps = args.local_cap
        base["local_caps"] = caps[0] if len(caps) == 1 else caps
    try:
        cfg = GenConfig.from_dict(base)
        if "local_caps" not in base:
            cfg = replace(cfg, local_caps=cfg.global_cap / cfg.stations)
        cfg.validate()
    except (ConfigError, ValueError, TypeError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_INVALID)
    return cfg


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


# -- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = config_from_args(args)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    _write(args.out, generate_instance(cfg).to_json())
    return 0


# -- run --------------------------------------------------------------------

def evaluate(instance, engine, *, verify=False, opt=None, baseline_reconsider=True,
             rerank=False, instance_id=""):
    """Run one engine; returns (csv row dict, trace, list of verification failures).

    ``opt`` is the exact optimal revenue when already known.
    """
    failures = []
    alpha = bound_or_none(instance)
    if engine == "scs":
        schedule, cert, trace = run_scs(instance, rerank=rerank)
        dual = cert.dual_objective
    elif engine == "greedy-rtl":
        schedule, _, trace = run_greedy_rtl(instance, reconsider=baseline_reconsider,
                                            return_trace=True)
        cert, dual = None, None
    else:
        raise CliError(f"unknown engine {engine!r}", EXIT_USAGE)
    report = compute_metrics(instance, schedule)
    if verify:
        failures += [f"primal: {v}" for v in verify_primal_feasibility(instance, schedule)]
        if cert is not None:
            failures += [f"dual: {v}" for v in verify_dual_feasibility(instance, cert)]
            if alpha is not None:
                b = verify_bound(instance, schedule, cert, opt)
                if not b.bound_ok:
                    failures.append(f"bound: dual objective {b.dual_objective:g} > "
                                    f"{b.scaled_revenue:g}")
                if b.weak_duality_ok is False:
                    failures.append(f"weak duality: dual objective {b.dual_objective:g} < OPT {opt:g}")
        if opt is not None and report.revenue > opt + 1e-9:
            failures.append(f"revenue {report.revenue:g} exceeds OPT {opt:g}")
    row = csv_row(instance_id, engine, report, alpha_bound=alpha, dual_objective=dual,
                  opt_revenue=opt)
    return row, trace, failures


def cmd_run(args) -> int:
    try:
        instance = load_instance(args.instance)
    except OSError as exc:
        raise CliError(f"cannot read instance: {exc}", EXIT_IO)
    problems = validate_instance(instance)
    if problems:
        raise CliError("invalid instance: " + "; ".join(problems), EXIT_INVALID)
    instance_id = args.instance_id or Path(args.instance).stem
    try:
        opt = brute_force_opt(instance)[0] if args.oracle else None
        row, trace, failures = evaluate(
            instance, args.engine, verify=args.verify, opt=opt,
            baseline_reconsider=args.baseline_reconsider == "on", rerank=args.rerank,
            instance_id=instance_id)
    except (PreconditionError, InstanceTooLargeError, InvalidInstanceError) as exc:
        raise CliError(str(exc), EXIT_INVALID)
    _write(args.out, format_csv([row], csv_columns(instance.m)))
    if args.trace:
        _write(args.trace, "".join(json.dumps(rec) + "\n" for rec in trace))
    for f in failures:
        print(f"verification failed: {f}", file=sys.stderr)
    return EXIT_VERIFY if failures else 0


# -- sweep ------------------------------------------------------------------

def _sweep_task(task):
    cfg, param, value, seed, engines, oracle, baseline_reconsider = task
    instance = generate_instance(cfg)
    pseudo, opt = "", None
    if oracle:
        opt = brute_force_opt(instance)[0]
        pseudo = repr(min_peak_among_optimal(instance))
    rows = []
    for engine in engines:
        row, _, _ = evaluate(instance, engine, opt=opt,
                             baseline_reconsider=baseline_reconsider,
                             instance_id=f"{param}={value:g}/seed={seed}")
        row.update(param=param, value=repr(value), seed=str(seed), pseudo_opt_peak=pseudo)
        rows.append(row)
    return rows


def _worker_count(flag):
    if flag:
        return flag
    env = os.environ.get("PEAKSHAVER_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def summarize(rows: list[dict], metric_columns: list[str]) -> list[dict]:
    """Mean, sample stddev and count per (param, value, engine)."""
    groups = {}
    for row in rows:
        groups.setdefault((row["param"], float(row["value"]), row["engine"]), []).append(row)
    out = []
    for (param, value, engine), members in sorted(groups.items()):
        summary = {"param": param, "value": repr(value), "engine": engine,
                   "count": str(len(members))}
        for col in metric_columns:
            xs = [float(r[col]) for r in members if r.get(col, "") != ""]
            summary[f"{col}_mean"] = repr(statistics.fmean(xs)) if xs else ""
            summary[f"{col}_std"] = repr(statistics.stdev(xs)) if len(xs) > 1 else ("0.0" if xs else "")
        out.append(summary)
    return out


def cmd_sweep(args) -> int:
    base = config_from_args(args)
    field = SWEEP_PARAMS[args.param]
    try:
        values = parse_values(args.values)
    except ValueError as exc:
        raise CliError(f"bad --values: {exc}", EXIT_USAGE)
    engines = [e.strip() for e in args.engines.split(",") if e.strip()]
    for e in engines:
        if e not in ENGINES:
            raise CliError(f"unknown engine {e!r}", EXIT_USAGE)
    explicit_caps = args.local_cap is not None or (
        args.config is not None and "local_caps" in json.loads(Path(args.config).read_text()))

    tasks = []
    for value in values:
        v = int(value) if field == "evs" else value
        cfg = replace(base, **{field: v})
        if field == "global_cap" and not explicit_caps:
            cfg = replace(cfg, local_caps=value / cfg.stations)
        try:
            cfg.validate()
        except ConfigError as exc:
            raise CliError(f"infeasible sweep value {args.param}={value:g}: {exc}", EXIT_INVALID)
        if "greedy-rtl" in engines and sum(cfg.caps()) > cfg.global_cap + 1e-9:
            raise CliError(f"greedy-rtl needs sum of local caps <= global cap at "
                           f"{args.param}={value:g}", EXIT_INVALID)
        if args.oracle and cfg.evs > DEFAULT_LIMIT:
            raise CliError(f"--oracle supports at most {DEFAULT_LIMIT} EVs, got {cfg.evs}",
                           EXIT_INVALID)
        for seed in range(args.seeds):
            tasks.append((cfg.with_seed(seed), args.param, value, seed, engines, args.oracle,
                          args.baseline_reconsider == "on"))

    workers = _worker_count(args.workers)
    log.info("sweep: %d instances on %d workers", len(tasks), workers)
    if workers == 1:
        chunks = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_task, tasks))
    rank = {e: k for k, e in enumerate(engines)}
    rows = sorted((r for chunk in chunks for r in chunk),
                  key=lambda r: (float(r["value"]), int(r["seed"]), rank[r["engine"]]))

    columns = csv_columns(base.stations) + SWEEP_EXTRA
    metric_columns = [c for c in columns if c not in
                      ("instance_id", "engine", "param", "value", "seed")]
    _write(args.out, format_csv(rows, columns))
    summary = summarize(rows, metric_columns)
    if summary:
        summary_path = args.summary or (None if args.out in (None, "-") else
                                        str(Path(args.out).with_name(Path(args.out).stem + "_summary.csv")))
        if summary_path:
            _write(summary_path, format_csv(summary, list(summary[0])))
    return 0


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="peakshaver", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a random instance as JSON")
    _add_config_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="schedule one instance and print a metrics row")
    p.add_argument("--instance", required=True)
    p.add_argument("--engine", choices=ENGINES, default="scs")
    p.add_argument("--verify", action="store_true", help="check the schedule and certificate")
    p.add_argument("--oracle", action="store_true", help="also compute the exact optimum")
    p.add_argument("--baseline-reconsider", choices=("on", "off"), default="on")
    p.add_argument("--rerank", action="store_true",
                   help="level-filling allocation instead of the one-shot slot ranking")
    p.add_argument("--instance-id")
    p.add_argument("--trace", help="write the decision trace as JSON lines")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter over seeds and engines")
    _add_config_flags(p)
    p.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--seeds", type=int, default=50, help="seeds 0..N-1")
    p.add_argument("--engines", default="scs,greedy-rtl")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--baseline-reconsider", choices=("on", "off"), default="on")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="detail CSV (default stdout)")
    p.add_argument("--summary", help="summary CSV (default <out>_summary.csv)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"peakshaver: {exc}", file=sys.stderr)
        return exc.code
    except (InvalidInstanceError, ConfigError, UnboundedRatioError) as exc:
        print(f"peakshaver: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
