"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 nothing computable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import config as cfg
from .core import LLError, Lifetime, TaskId
from .ingest import (
    LogFormatError,
    STERun,
    assemble_lifetime,
    load_ste_dir,
    read_log,
    split_runs,
    ste_runs_from_records,
    validate_run,
    write_log,
)
from .metrics import (
    MetricOptions,
    MetricResult,
    TransferMode,
    compute_all,
    demonstrates_ll,
    evaluate_thresholds,
    ll_threshold,
)
from .preprocess import PreprocessConfig, prepare
from .rng import derive_seed
from .scenario import build_protocol, generate
from .simulate import simulate_lifetime, simulate_ste_records
from .stats import (
    StatsError,
    aggregate_runs,
    binarized_threshold_test,
    correlation_matrix,
    cost_overhead,
    one_tailed_t_test,
    required_sample_size,
)

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2

log = logging.getLogger("llmetrics")


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_config(args: argparse.Namespace) -> dict[str, Any]:
    path = getattr(args, "config", None)
    return cfg.load_toml(path) if path else {}


# -- validate ----------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    expected = [TaskId.parse(s) for s in args.expected_tasks.split(",")] if args.expected_tasks else None
    reports = []
    for path in args.logs:
        try:
            records = read_log(path)
        except LogFormatError as exc:
            reports.append({"file": str(path), "run_id": None, "is_usable": False,
                            "errors": [{"line": exc.line, "code": exc.code, "message": exc.message}], "warnings": []})
            continue
        except OSError as exc:
            reports.append({"file": str(path), "run_id": None, "is_usable": False,
                            "errors": [{"line": None, "code": "E_IO", "message": str(exc)}], "warnings": []})
            continue
        if not records:
            reports.append({"file": str(path), "run_id": None, "is_usable": False,
                            "errors": [{"line": None, "code": "E_EMPTY_RUN", "message": "file has no records"}],
                            "warnings": []})
        for run_id in sorted(split_runs(records)):
            report = validate_run(split_runs(records)[run_id], expected)
            reports.append({"file": str(path), **report.to_dict()})

    if args.format == "json":
        print(_dump(reports))
    else:
        for rep in reports:
            status = "OK" if rep["is_usable"] else "INVALID"
            print(f"{rep['file']} run={rep['run_id']}: {status} "
                  f"({len(rep['errors'])} errors, {len(rep['warnings'])} warnings)")
            for kind in ("errors", "warnings"):
                for f in rep[kind]:
                    where = f"line {f['line']}: " if f["line"] is not None else ""
                    _err(f"{rep['file']}: {f['code']} {where}{f['message']}")
    return EXIT_OK if all(r["is_usable"] for r in reports) else EXIT_INPUT


# -- metrics -----------------------------------------------------------------


def _pick_measure(lifetime: Lifetime, requested: str | None) -> str:
    if requested:
        return requested
    names = {m for rec in lifetime.records() for m in rec.measures}
    if len(names) != 1:
        raise LLError("E_MEASURE_AMBIGUOUS", f"run {lifetime.run_id!r} has measures {sorted(names)}; pass --measure")
    return names.pop()


def _run_metrics(
    lifetime: Lifetime,
    measure: str | None,
    pre: PreprocessConfig,
    options: MetricOptions,
    ste_runs: dict[TaskId, list[STERun]] | None,
) -> dict[str, Any]:
    measure = _pick_measure(lifetime, measure)
    prepared = prepare(lifetime, measure, pre, ste_runs)
    report = compute_all(prepared.summaries, prepared.ste, options)
    return {
        "run_id": lifetime.run_id,
        "measure": measure,
        "preprocess": prepared.summaries.manifest.to_dict(),
        "metrics": [r.to_dict() for r in report.results],
        "verdicts": [v.to_dict() for v in evaluate_thresholds(report.results)],
        "notices": report.notices,
        "_curves": {
            t.label: {
                "ll": prepared.summaries.stitched(t),
                "ste": list(prepared.ste[t].series) if t in prepared.ste else None,
            }
            for t in sorted(set(prepared.summaries.block_tasks), key=TaskId.sort_key)
        },
    }


def _run_metrics_star(job: tuple) -> dict[str, Any]:
    return _run_metrics(*job)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_metrics(args: argparse.Namespace) -> int:
    doc = _load_config(args)
    pre = cfg.preprocess_config(doc)
    window = args.window if args.window is not None else pre.smoothing_window
    if window < 1 or window % 2 == 0:
        raise LLError("E_BAD_WINDOW", f"--window must be odd and >= 1, got {window}")
    pre = PreprocessConfig(window, pre.eval_summarizer, pre.range_shift, pre.shift_epsilon)
    options = MetricOptions(
        mode=TransferMode(args.mode),
        window=window,
        ft_first_pair_only=args.ft_first_pair_only,
        bt_every_block=args.bt_every_block,
        recovery=args.pr,
        recovery_tolerance=args.pr_tolerance,
    )
    ste_runs = load_ste_dir(args.ste_dir) if args.ste_dir else None

    lifetimes = []
    failed = False
    for path in args.logs:
        for run_id, records in sorted(split_runs(read_log(path)).items()):
            report = validate_run(records)
            if not report.is_usable:
                failed = True
                for f in report.errors:
                    _err(f"{path}: run {run_id}: {f.code} line {f.line}: {f.message}")
                continue
            lifetimes.append(assemble_lifetime(records))
    lifetimes.sort(key=lambda lt: lt.run_id)

    jobs = [(lt, args.measure, pre, options, ste_runs) for lt in lifetimes]
    workers = getattr(args, "jobs", 1) or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_metrics_star, jobs))
    else:
        outputs = [_run_metrics_star(job) for job in jobs]

    if args.export_curves:
        out = Path(args.export_curves)
        out.mkdir(parents=True, exist_ok=True)
        for res in outputs:
            for label, curves in res["_curves"].items():
                with open(out / f"{_safe(res['run_id'])}__{_safe(label)}.csv", "w", newline="") as fh:
                    writer = csv.writer(fh, lineterminator="\n")
                    writer.writerow(["lx", "ll", "ste"])
                    ste = curves["ste"] or []
                    for i, v in enumerate(curves["ll"]):
                        writer.writerow([i + 1, repr(v), repr(ste[i]) if i < len(ste) else ""])
    for res in outputs:
        del res["_curves"]

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for res in outputs:
            (out / f"{_safe(res['run_id'])}.metrics.json").write_text(_dump(res) + "\n", encoding="utf-8")
    if args.format == "json":
        if not args.out_dir:
            print(_dump(outputs))
    else:
        for res in outputs:
            print(f"run {res['run_id']} (measure {res['measure']})")
            for m in res["metrics"]:
                agg = m["aggregate"]
                label = f"{m['metric']}({m['mode']})" if m["mode"] else m["metric"]
                shown = "absent" if agg is None else f"{agg:.6g}"
                reasons = "; ".join(f"{s['unit']}: {s['reason']}" for s in m["skipped"][:3])
                print(f"  {label:<14} {shown}" + (f"  [skipped {reasons}]" if agg is None and reasons else ""))
            for v in res["verdicts"]:
                label = f"{v['metric']}({v['mode']})" if v["mode"] else v["metric"]
                op = ">" if v["direction"] == "greater" else "<"
                print(f"  verdict {label}: {'demonstrates LL' if v['demonstrates_ll'] else 'does not demonstrate LL'} "
                      f"(value {op} {v['threshold']:g} required)")
            for note in res["notices"]:
                print(f"  note: {note}")

    if failed:
        return EXIT_INPUT
    if not any(m["aggregate"] is not None for res in outputs for m in res["metrics"]):
        _err("no metric computable")
        return EXIT_EMPTY
    return EXIT_OK


# -- aggregate ---------------------------------------------------------------


def _read_metric_files(paths: Sequence[str]) -> dict[str, list[MetricResult]]:
    runs: dict[str, list[MetricResult]] = {}
    for path in paths:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise LLError("E_PARSE", f"{path}: {exc}") from None
        for entry in data if isinstance(data, list) else [data]:
            run_id = entry.get("run_id")
            if run_id in runs:
                raise LLError("E_DUPLICATE_RUN", f"run {run_id!r} appears more than once")
            runs[run_id] = [MetricResult.from_dict(m) for m in entry.get("metrics", [])]
    return runs


def cmd_aggregate(args: argparse.Namespace) -> int:
    runs = _read_metric_files(args.files)
    if not runs:
        _err("no runs in input")
        return EXIT_EMPTY
    table = aggregate_runs(runs)
    tests: dict[str, Any] = {}
    for key, row in table.rows.items():
        if not row.values:
            tests[key] = {"error": "no defined values"}
            continue
        threshold, direction = ll_threshold(row.metric_name, row.mode)
        # a "less is better" metric is tested as its negation
        sign = 1.0 if direction == "greater" else -1.0
        values = [sign * v for v in row.values]
        entry: dict[str, Any] = {"threshold": threshold, "direction": direction, "test": args.test}
        try:
            if args.test == "t":
                res = one_tailed_t_test(values, sign * threshold)
                entry.update(res.to_dict())
                entry["mean"] = row.mean
                entry["significant"] = res.p < args.alpha
            else:
                entry.update(binarized_threshold_test(values, sign * threshold, args.alpha).to_dict())
        except StatsError as exc:
            entry["error"] = exc.code
            entry["message"] = exc.message
        entry["mean_demonstrates_ll"] = demonstrates_ll(row.mean, threshold, direction)
        tests[key] = entry

    notices = []
    correlations = None
    if len(runs) >= 3:
        correlations = [c.to_dict() for c in correlation_matrix(table)]
    else:
        notices.append(f"correlations omitted: {len(runs)} runs (need at least 3)")

    if args.format == "json":
        print(_dump({"runs": len(runs), "table": table.to_dict(), "tests": tests,
                     "correlations": correlations, "notices": notices}))
    else:
        print(table.to_text())
        print()
        for key, entry in tests.items():
            if "error" in entry:
                print(f"{key:<14} test unavailable: {entry['error']}")
            elif args.test == "t":
                print(f"{key:<14} t={entry['t']:.4f} df={entry['df']} p={entry['p']:.6g}"
                      f"{' *' if entry['significant'] else ''}")
            else:
                print(f"{key:<14} {entry['successes']}/{entry['n']} beyond threshold, p={entry['p']:.6g}"
                      f"{' *' if entry['significant'] else ''}")
        if correlations:
            print()
            for c in correlations:
                rho = "n/a" if c["rho"] is None else f"{c['rho']:+.3f}"
                p = "" if c["p"] is None else f" p={c['p']:.3g}"
                print(f"{c['metric_a']:<12} ~ {c['metric_b']:<12} n={c['n']} rho={rho}{p}")
        for note in notices:
            print(f"note: {note}")
    return EXIT_OK


# -- scenario / simulate -----------------------------------------------------


def cmd_scenario(args: argparse.Namespace) -> int:
    spec = cfg.scenario_spec(cfg.load_toml(args.spec))
    if getattr(args, "seed", None) is not None:
        spec = spec.with_seed(args.seed)
    schedule = generate(spec)
    records = schedule.to_records("plan")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_log(args.out, records)
    else:
        from .ingest import serialize

        sys.stdout.writelines(serialize(records))
    if args.format == "json" and args.out:
        print(_dump({"blocks": len(schedule.blocks), "learning_blocks": len(schedule.learning_blocks),
                     "experiences": len(records), **schedule.provenance}))
    elif args.out:
        print(f"wrote {len(records)} planned experiences in {len(schedule.blocks)} blocks to {args.out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = cfg.load_toml(args.spec)
    spec = cfg.scenario_spec(doc)
    params = cfg.agent_params(doc, spec)
    if args.noise_sd is not None:
        params = params.with_noise(args.noise_sd)
    master = args.seed if getattr(args, "seed", None) is not None else params.seed
    protocol = build_protocol(spec, args.lifetimes, master)
    for w in protocol.warnings:
        _err(w)

    out = Path(args.out_dir)
    (out / "lifetimes").mkdir(parents=True, exist_ok=True)
    (out / "ste").mkdir(parents=True, exist_ok=True)
    first_schedule = None
    for i, seed in enumerate(protocol.seeds):
        schedule = generate(spec.with_seed(derive_seed(seed, 0)))
        first_schedule = first_schedule or schedule
        records = simulate_lifetime(params.with_noise(params.noise_sd, derive_seed(seed, 1)), schedule, f"run-{i:03d}")
        write_log(out / "lifetimes" / f"run-{i:03d}.jsonl", records)

    for j, task in enumerate(spec.task_variants()):
        lengths = [b.length for b in first_schedule.learning_blocks if b.tasks[0] == task]
        ste_params = params.with_noise(params.noise_sd, derive_seed(master, args.lifetimes + j))
        records = simulate_ste_records(ste_params, task, sum(lengths), f"ste-{task.label}", lengths)
        write_log(out / "ste" / f"{_safe(task.label)}.jsonl", records)

    (out / "protocol.json").write_text(_dump(protocol.to_dict()) + "\n", encoding="utf-8")
    if args.format == "json":
        print(_dump({"out_dir": str(out), "lifetimes": args.lifetimes, "master_seed": master}))
    else:
        print(f"simulated {args.lifetimes} lifetimes and {len(spec.task_variants())} STE runs into {out}")
    return EXIT_OK


# -- small calculators -------------------------------------------------------


def cmd_samplesize(args: argparse.Namespace) -> int:
    n = required_sample_size(args.k, args.alpha, args.beta)
    print(_dump({"k": args.k, "alpha": args.alpha, "beta": args.beta, "n": n}) if args.format == "json" else n)
    return EXIT_OK


def cmd_cost(args: argparse.Namespace) -> int:
    value = cost_overhead(args.raw_multi_seconds, args.total_lx_multi, args.raw_single_seconds, args.total_lx_single)
    print(_dump({"cost_overhead": value}) if args.format == "json" else repr(value))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _global_options(defaults: bool) -> argparse.ArgumentParser:
    # Added to the main parser and every subparser so global flags work in
    # either position; subparsers use SUPPRESS so they don't clobber the main value.
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--format", choices=("text", "json"), default=d("text"))
    p.add_argument("--config", default=d(None), help="TOML config file")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=d(None), help="master seed (u64)")
    p.add_argument("--jobs", type=int, default=d(1), help="worker processes for per-run work")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llmetrics", description=__doc__, parents=[_global_options(True)])
    common = _global_options(False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate lifetime logs")
    p.add_argument("logs", nargs="+")
    p.add_argument("--expected-tasks", help="comma-separated task labels every EB must cover")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", parents=[common], help="compute LL metrics per run")
    p.add_argument("logs", nargs="+")
    p.add_argument("--measure")
    p.add_argument("--mode", choices=("ratio", "contrast"), default="ratio")
    p.add_argument("--ste-dir")
    p.add_argument("--window", type=int)
    p.add_argument("--ft-first-pair-only", action="store_true")
    p.add_argument("--bt-every-block", action="store_true")
    p.add_argument("--pr", action="store_true", help="also compute experimental performance recovery")
    p.add_argument("--pr-tolerance", type=float, default=0.05)
    p.add_argument("--out-dir", help="write <run_id>.metrics.json files here")
    p.add_argument("--export-curves", metavar="DIR", help="dump stitched per-task curves as CSV")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("aggregate", parents=[common], help="aggregate per-run metric files")
    p.add_argument("files", nargs="+")
    p.add_argument("--test", choices=("t", "binomial"), default="t")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("scenario", parents=[common], help="generate a block schedule plan")
    p.add_argument("spec")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", parents=[common], help="simulate synthetic lifetimes and STEs")
    p.add_argument("spec")
    p.add_argument("--lifetimes", type=int, default=11)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--noise-sd", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("samplesize", parents=[common], help="required number of lifetimes")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.1)
    p.set_defaults(func=cmd_samplesize)

    p = sub.add_parser("cost", parents=[common], help="cost overhead of lifelong learning")
    p.add_argument("raw_multi_seconds", type=float)
    p.add_argument("total_lx_multi", type=int)
    p.add_argument("raw_single_seconds", type=float)
    p.add_argument("total_lx_single", type=int)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LLError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except OSError as exc:
        _err(f"E_IO: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
