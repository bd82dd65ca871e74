"""Command-line driver.

    rollupcrowd scenario <file-or-bundled-name> [--layer l2|l1|direct] [--out DIR]
    rollupcrowd attack <name>
    rollupcrowd bench <kind> [--n N] [--block-time S] [--seed X]
    rollupcrowd export --series <name> --out <path> [--report report.json]

Reports go to ``$ROLLUPCROWD_OUT`` (default ``./rollupcrowd-out``).
Exit codes: 0 success, 2 configuration error, 3 failed check.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import BadParams, ConfigError, UnknownAttack, UnknownSeries
from .harness.attacks import ATTACKS, run_attack
from .harness.bench import BENCH_KINDS, bench_checks, run_bench
from .harness.report import SERIES_COLUMNS, MetricsReport, plot_data, write_report
from .harness.scenario import bundled_scenario, output_dir, run_scenario
from .harness.world import LAYERS

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3
LAST_REPORT = "last_report"


def _remember(out: Path, report_path: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / LAST_REPORT).write_text(str(report_path.resolve()) + "\n")


def _print_checks(checks: dict[str, bool]) -> bool:
    for name, ok in checks.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
    return all(checks.values())


def cmd_scenario(args) -> int:
    path = Path(args.file)
    if not path.exists() and not path.suffix:
        path = bundled_scenario(args.file)
    out = output_dir()
    target = Path(args.out) if args.out else None
    report = run_scenario(path, target, layer=args.layer)
    report_dir = target or out / report.name
    _remember(out, report_dir / "report.json")
    escrow = report.summary["escrow"]
    checks = {
        "escrow_conserved": sum(escrow.values()) == report.summary["total_deposited"],
        "every_finalized_tx_has_latency": all(r["latency"] >= 0 for r in report.latencies),
    }
    print(f"scenario {report.name}: state_root={report.summary['state_root']}")
    print(f"  tasks: {json.dumps(report.summary['task_states'], sort_keys=True)}")
    print(f"  throughput={report.throughput:.4f} tx/s  l1_gas={report.gas['l1_total']}")
    return EXIT_OK if _print_checks(checks) else EXIT_CHECK


def cmd_attack(args) -> int:
    names = list(ATTACKS) if args.name == "all" else [args.name]
    out = output_dir() / "attacks"
    out.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for name in names:
        rep = run_attack(name, args.layer)
        (out / f"{name}.json").write_text(json.dumps(rep.to_dict(), sort_keys=True, indent=2) + "\n")
        print(f"{name}: {rep.verdict}")
        all_ok &= _print_checks(rep.checks)
    return EXIT_OK if all_ok else EXIT_CHECK


def cmd_bench(args) -> int:
    report = run_bench(args.kind, n=args.n, block_time=args.block_time, seed=args.seed)
    out = output_dir()
    path = write_report(report, out / report.name)
    _remember(out, path)
    print(f"bench {report.name}: wrote {path}")
    return EXIT_OK if _print_checks(bench_checks(report)) else EXIT_CHECK


def cmd_export(args) -> int:
    if args.report:
        report_path = Path(args.report)
    else:
        marker = output_dir() / LAST_REPORT
        if not marker.is_file():
            raise ConfigError("no report to export; run a scenario or bench first or pass --report")
        report_path = Path(marker.read_text().strip())
    try:
        report = MetricsReport.from_json(report_path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such report: {report_path}") from None
    plot_data(report, args.series, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rollupcrowd", description="Crowdsourcing-over-rollup simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="run a scenario config")
    p.add_argument("file", help="path to a JSON config, or the name of a bundled scenario")
    p.add_argument("--layer", choices=LAYERS, default=None)
    p.add_argument("--out", default=None, help="report directory")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("attack", help="run an adversary scenario")
    p.add_argument("name", choices=[*ATTACKS, "all"])
    p.add_argument("--layer", choices=LAYERS, default="l2")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="run a benchmark workload")
    p.add_argument("kind", choices=BENCH_KINDS)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--block-time", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="write one report series as CSV")
    p.add_argument("--series", required=True, choices=sorted(SERIES_COLUMNS))
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BadParams, UnknownAttack, UnknownSeries) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
