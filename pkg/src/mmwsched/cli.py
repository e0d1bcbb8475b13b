"""Command line entry point: ``mmwsched {run,compare,validate}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from . import report
from .engine import RunResult, Scenario, run
from .metrics import RunSummary, summarize
from .scenarios import BUILTINS, ConfigError, scenario_from_config, scenario_to_config
from .sched import Policy

log = logging.getLogger("mmwsched")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def load_config(source: str) -> dict[str, Any]:
    """Builtin name (``case1``/``case2``) or a JSON/YAML scenario file."""
    if source in BUILTINS:
        return {"base": source}
    path = Path(source)
    if not path.is_file():
        raise ConfigError("scenario", f"no builtin or file named {source!r}")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("scenario", f"cannot parse {source}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("scenario", "top level must be a mapping")
    return raw


def load_scenario(source: str, seed: int | None = None, **overrides) -> Scenario:
    raw = load_config(source)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return scenario_from_config(raw, seed)


@dataclass
class RunSpec:
    scenario: str
    schedulers: list[str] | None = None  # None -> the scenario's own scheduler
    seeds: list[int] = field(default_factory=lambda: [42])
    duration_ms: float | None = None
    out: Path = Path("out")
    trace: bool = False
    compare: bool = False
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")


def execute(scenario: Scenario, trace: bool = False) -> tuple[Scenario, RunResult, RunSummary]:
    result = run(scenario, trace=trace)
    return scenario, result, summarize(result, scenario)


def _execute_star(args):
    return execute(*args)


def plan_runs(spec: RunSpec) -> list[Scenario]:
    raw = load_config(spec.scenario)
    if spec.duration_ms is not None:
        raw["duration_ms"] = spec.duration_ms
    schedulers = spec.schedulers or [None]
    scenarios = []
    for sched in schedulers:
        for seed in spec.seeds:
            cfg = dict(raw)
            if sched is not None:
                cfg["scheduler"] = sched
            scenarios.append(scenario_from_config(cfg, seed))
    return scenarios


def run_command(spec: RunSpec) -> int:
    try:
        scenarios = plan_runs(spec)
        if spec.compare and len({s.policy for s in scenarios}) < 2:
            raise ConfigError("scheduler", "compare needs at least two schedulers")
        spec.out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot prepare output directory: %s", exc)
        return EXIT_RUNTIME

    try:
        jobs = [(sc, spec.trace) for sc in scenarios]
        if spec.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(spec.jobs) as pool:
                finished = list(pool.map(_execute_star, jobs))
        else:
            finished = [execute(*j) for j in jobs]

        packets, ue_rows, run_rows = [], [], []
        for sc, result, summary in finished:
            rid = report.run_id(sc)
            log.info("%s: J(thr)=%.3f p95tail=%.0f us", rid, summary.fairness.throughput_jain,
                     summary.system_p95_tail_us)
            packets.append(report.packets_rows(rid, result))
            ue_rows.extend(report.ue_summary_rows(rid, summary))
            run_rows.append(report.run_summary_row(rid, sc, summary))
            report.write_text_atomic(spec.out / f"config_{rid}.json", report.config_echo(sc))
            if spec.trace:
                report.write_csv_atomic(spec.out / f"trace_{rid}.csv", report.TRACE_COLUMNS,
                                        report.trace_rows(rid, result))
        report.write_csv_atomic(spec.out / "packets.csv", report.PACKETS_COLUMNS,
                                (row for rows in packets for row in rows))
        report.write_csv_atomic(spec.out / "ue_summary.csv", report.UE_SUMMARY_COLUMNS, ue_rows)
        report.write_csv_atomic(spec.out / "run_summary.csv", report.RUN_SUMMARY_COLUMNS, run_rows)

        if spec.compare:
            groups: dict[str, list[report.RunRecord]] = {}
            for sc, _, summary in finished:
                groups.setdefault(sc.policy.value, []).append(report.RunRecord(sc, summary))
            rows = report.compare_report(groups)
            report.write_csv_atomic(spec.out / "comparison.csv", report.COMPARISON_COLUMNS,
                                    report.comparison_rows(rows))
            print(report.render_table(rows), end="")
    except (OSError, ValueError, RuntimeError) as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


def _seeds(text: str) -> list[int]:
    """``42``, ``1,2,3`` or an inclusive range ``1-5``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _schedulers(text: str) -> list[str]:
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    valid = [p.value for p in Policy]
    for name in names:
        if name not in valid:
            raise argparse.ArgumentTypeError(f"unknown scheduler {name!r}; choose from {valid}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmwsched", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_scheds=None):
        p.add_argument("--scenario", required=True, help="case1, case2 or a JSON/YAML config file")
        p.add_argument("--scheduler", type=_schedulers, default=default_scheds,
                       help="comma-separated subset of rr,maxrate,spf,gpf,epf")
        p.add_argument("--seeds", type=_seeds, default=[42], help="e.g. 42 or 1-5 or 1,7,9")
        p.add_argument("--duration-ms", type=float, default=None)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--trace", action="store_true", help="also write per-subframe grant traces")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    common(sub.add_parser("run", help="simulate and write packets/ue_summary/run_summary CSVs"))
    common(sub.add_parser("compare", help="run several schedulers and write comparison.csv"),
           default_scheds=["spf", "epf"])
    val = sub.add_parser("validate", help="resolve a scenario and print its full configuration")
    val.add_argument("--scenario", required=True)
    val.add_argument("--seeds", type=_seeds, default=[42])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.command == "validate":
        try:
            sc = load_scenario(args.scenario, args.seeds[0])
        except ConfigError as exc:
            log.error("config error: %s", exc)
            return EXIT_CONFIG
        print(json.dumps(scenario_to_config(sc), indent=2, sort_keys=True))
        return EXIT_OK

    try:
        spec = RunSpec(args.scenario, args.scheduler, args.seeds, args.duration_ms, args.out,
                       args.trace, args.command == "compare", args.jobs)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return run_command(spec)


if __name__ == "__main__":
    sys.exit(main())
