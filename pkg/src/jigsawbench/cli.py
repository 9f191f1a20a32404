"""Command-line entry point: ``gen``, ``run``, ``compare`` and ``oracle``.

Exit codes: 0 success, 1 configuration or input error, 2 some trials
failed, 3 an oracle exceeded its tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, IncompatibleTasks, JigsawBenchError, ReportError
from .harness import compare, format_comparison, load_config, load_report, run_suite, write_report
from .jigsaw import generate_set, set_to_json
from .oracles import DEFAULT_SAMPLES, KINDS, MC_SAMPLES, run_oracle

EXIT_OK, EXIT_CONFIG, EXIT_TRIALS, EXIT_ORACLE = 0, 1, 2, 3


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    try:
        jset = generate_set(args.code, args.clearance)
    except (ValueError, JigsawBenchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(set_to_json(jset) + "\n", args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        config = config.with_overrides(base_seed=args.seed, repeats=args.repeats, jobs=args.jobs,
                                       output_path=args.out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = config.output_path or "report.json"
    dump_dir = Path(out).with_suffix(".obs") if args.dump_obs else None
    report = run_suite(config, dump_dir=dump_dir)
    json_path, csv_path = write_report(report, out)
    agg = report["body"]["aggregates"]
    print(f"wrote {json_path} and {csv_path}")
    for m in ("score", "mean_iou", "ap", "success_rate", "grasp_time_s"):
        if agg.get(m):
            print(f"  {m:<14} {agg[m]['mean']:.4f} ± {agg[m]['std']:.4f}")
    failed = report["body"]["failed_trials"]
    if failed:
        print(f"{failed} of {config.repeats} trials failed", file=sys.stderr)
        return EXIT_TRIALS
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        reports = [load_report(p) for p in args.reports]
        result = compare(reports, args.threshold, labels=[Path(p).stem for p in args.reports])
    except (ReportError, IncompatibleTasks, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(format_comparison(result))
    if args.json:
        Path(args.json).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_oracle(args) -> int:
    kw = {}
    if args.kind in ("iou_mc", "clip_mc"):
        kw["mc_samples"] = args.mc_samples
    report = run_oracle(args.kind, args.samples, args.seed, **kw)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    _emit(text, args.out)
    if args.out:
        print(f"{report.kind}: max discrepancy {report.max_discrepancy:.3g} "
              f"(tolerance {report.tolerance:g}) {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jigsawbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a jigsaw set as JSON")
    g.add_argument("--code", required=True, help="six-digit jigsaw code, e.g. 000101")
    g.add_argument("--clearance", type=float, default=0.0, help="assembly clearance in mm")
    g.add_argument("--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a benchmark suite")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="base seed (overrides [harness] base_seed)")
    r.add_argument("--repeats", type=int)
    r.add_argument("--out", help="report path; a CSV is written alongside")
    r.add_argument("--jobs", type=int, help="worker threads")
    r.add_argument("--dump-obs", action="store_true", help="write every observation as a PGM file")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare two or more reports")
    c.add_argument("reports", nargs="+")
    c.add_argument("--threshold", type=float, default=0.05)
    c.add_argument("--json", help="also write the comparison as JSON")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", help="cross-check geometry against brute-force oracles")
    o.add_argument("--kind", required=True, choices=KINDS)
    o.add_argument("--samples", type=int, help=f"instances (defaults: {DEFAULT_SAMPLES})")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--mc-samples", type=int, default=MC_SAMPLES, help="Monte-Carlo points per instance")
    o.add_argument("--out", help="write the JSON report here instead of stdout")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "compare" and len(args.reports) < 2:
        parser.error("compare needs at least two reports")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
