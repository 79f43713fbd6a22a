"""``nlmg`` command line: run, sweep and rates.

Exit codes: 0 success, 2 configuration error (nothing is written),
3 solver failure, 4 an acceptance check failed (``--check``).
Set ``NLMG_LOG`` to a logging level name (e.g. INFO, DEBUG) for progress output.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .exceptions import ConfigError, NlmgError, NonPositiveError
from .report import compute_rates, read_table, write_report
from .study import evaluate_checks, load_config, run_study

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

log = logging.getLogger("nlmg")


def _setup_logging():
    level = os.environ.get("NLMG_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING) if not level.isdigit() else int(level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _run_one(config_path, mode=None, out=None, check=False):
    try:
        cfg = load_config(config_path, {"mode": mode, "output": out})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, wall = run_study(cfg)
    except NlmgError as exc:
        traces = getattr(exc, "traces", None)
        where = f" after level {traces[-1].k}" if traces else ""
        print(f"solver failure{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    checks = evaluate_checks(report) if check else []
    if check:
        report["checks"] = [{"name": n, "passed": bool(p), "detail": d} for n, p, d in checks]
    out_dir = Path(cfg.output)
    write_report(report, out_dir)
    (out_dir / "timing.json").write_text(json.dumps({"wall_seconds": wall}) + "\n")
    for row in report["rows"]:
        lam = row.get("lambda_scheme", row.get("lambda_direct"))
        print(f"level {row['k']:2d}  N={row['n_dofs']:8d}  lambda={lam:.12f}")
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'table.csv'}")
    if check and not all(p for _, p, _ in checks):
        return EXIT_CHECK
    return EXIT_OK


def cmd_run(args):
    return _run_one(args.config, args.mode, args.out, args.check)


def cmd_sweep(args):
    configs = sorted(Path(args.configs).glob("*.json"))
    if not configs:
        print(f"config error: no *.json files in {args.configs}", file=sys.stderr)
        return EXIT_CONFIG
    out_root = Path(args.out)
    jobs = [(str(p), None, str(out_root / p.stem), args.check) for p in configs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one, *zip(*jobs)))
    else:
        codes = [_run_one(*j) for j in jobs]
    for p, code in zip(configs, codes):
        print(f"{p.name}: exit {code}")
    return max(codes)


def cmd_rates(args):
    try:
        cols = read_table(args.csv)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error: cannot read {args.csv}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    names = [c for c in cols if c.startswith("err_")]
    if not names:
        print(f"config error: {args.csv} has no error columns", file=sys.stderr)
        return EXIT_CONFIG
    for name in names:
        vals = [v for v in cols[name] if v is not None]
        try:
            rates = compute_rates(vals, args.beta)
        except NonPositiveError as exc:
            print(f"{name}: {exc}")
            continue
        print(f"{name}: " + " ".join(f"{r:.4f}" for r in rates))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="nlmg", description="Multilevel correction solver for nonlinear eigenproblems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("scheme", "direct", "both"))
    p.add_argument("--check", action="store_true", help="evaluate acceptance checks; exit 4 on failure")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every *.json configuration in a directory")
    p.add_argument("--configs", required=True)
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--check", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rates", help="empirical convergence rates of a table.csv")
    p.add_argument("--csv", required=True)
    p.add_argument("--beta", type=int, default=2)
    p.set_defaults(func=cmd_rates)
    return parser


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
