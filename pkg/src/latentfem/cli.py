"""Command line entry point: ``latentfem run|sweep|report``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import logging
from pathlib import Path
import sys

from . import postproc
from .config import ConfigError, load_config
from .experiments import default_output_dir, run

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

logger = logging.getLogger("latentfem")


def _run_one(path, overrides, out_dir=None):
    """Worker body shared by ``run`` and ``sweep``; returns (path, exit code, message)."""
    try:
        cfg = load_config(path, overrides)
    except ConfigError as exc:
        return str(path), EXIT_CONFIG, str(exc)
    try:
        result, out = run(cfg, out_dir)
    except (ValueError, KeyError) as exc:
        return str(path), EXIT_CONFIG, f"invalid configuration: {exc}"
    if result.status == "failed":
        return str(path), EXIT_SOLVER, f"solver failure: {result.message} (outputs in {out})"
    avg = result.average_iterations
    return str(path), EXIT_OK, f"{result.status}: {len(result.converged_records)} steps, {avg:.2f} Newton iterations/step -> {out}"


def cmd_run(args):
    out = Path(args.output) if args.output else None
    _, code, msg = _run_one(args.config, args.override, out)
    print(msg, file=sys.stderr if code else sys.stdout)
    return code


def cmd_sweep(args):
    root = Path(args.config_dir)
    if not root.is_dir():
        print(f"not a directory: {root}", file=sys.stderr)
        return EXIT_CONFIG
    paths = sorted(p for p in root.iterdir() if p.suffix in (".cfg", ".conf", ".ini", ".txt") and p.is_file())
    if not paths:
        print(f"no config files (*.cfg) in {root}", file=sys.stderr)
        return EXIT_CONFIG
    # reject the whole sweep before running anything if a config is malformed
    problems = []
    for p in paths:
        try:
            cfg = load_config(p, args.override)
            default_output_dir(cfg)
        except ConfigError as exc:
            problems.append(f"{p}: {exc}")
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return EXIT_CONFIG
    jobs = [(str(p), list(args.override)) for p in paths]
    if args.serial or args.jobs == 1:
        outcomes = [_run_one(p, ov) for p, ov in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_one, *zip(*jobs)))
    worst = EXIT_OK
    for path, code, msg in outcomes:
        print(f"{path}: {msg}", file=sys.stderr if code else sys.stdout)
        worst = max(worst, code)
    return worst


def collect_results(results_dir):
    """Per-run iteration data from every ``metrics.json`` + ``statistics.csv`` pair below a directory."""
    runs = []
    for meta_path in sorted(Path(results_dir).rglob("metrics.json")):
        stats = meta_path.with_name("statistics.csv")
        if not stats.exists():
            continue
        meta = json.loads(meta_path.read_text())
        rows = postproc.read_statistics(stats)
        runs.append(
            {
                "scheme": meta.get("label") or meta.get("scheme", "?"),
                "mesh": meta.get("mesh", ""),
                "dt_s": meta.get("dt0", float("nan")),
                "iterations": [r["newton_iters"] for r in rows if r["converged"]],
                "failed_steps": sum(1 for r in rows if not r["converged"]),
            }
        )
    return runs


def cmd_report(args):
    root = Path(args.results_dir)
    if not root.is_dir():
        print(f"not a directory: {root}", file=sys.stderr)
        return EXIT_CONFIG
    runs = collect_results(root)
    if not runs:
        print(f"no results (metrics.json + statistics.csv) below {root}", file=sys.stderr)
        return EXIT_CONFIG
    rows = postproc.iteration_report(runs)
    (root / "iteration_report.csv").write_text(postproc.report_csv(rows))
    table = postproc.report_table(rows)
    (root / "iteration_report.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="latentfem", description="Phase-change heat conduction experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE", help="override a config key (repeatable)"
        )
        p.add_argument("--serial", action="store_true", help="run everything in one process (deterministic)")

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (default: output.dir or results/<config name>)")
    add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every *.cfg in a directory")
    p.add_argument("config_dir")
    p.add_argument("-j", "--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="tabulate Newton iteration statistics of finished runs")
    p.add_argument("results_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
