"""CSV serialization and the scheduler comparison table.

Schemas (version 1):

* ``packets.csv``: one row per delivered packet
* ``ue_summary.csv``: one row per UE per run
* ``run_summary.csv``: one row per run
* ``comparison.csv``: one row per (scheduler, seed) plus one aggregate row
  per scheduler, with relative deltas against the baseline scheduler
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .engine import PACKET_DTYPE, RunResult, Scenario
from .metrics import RunSummary
from .scenarios import scenario_to_config

SCHEMA_VERSION = 1

PACKETS_COLUMNS = ["run_id", "ue", "packet_id", "size_bits", "arrival_us", "departure_us",
                   "t_queue_us", "t_transmit_us", "t_phy_us", "t_propagate_us", "retx_count"]
UE_SUMMARY_COLUMNS = ["run_id", "ue", "delivered_bits", "throughput_mbps", "mean_latency_us",
                      "p95_tail_us", "drops"]
RUN_SUMMARY_COLUMNS = ["run_id", "scheduler", "seed", "throughput_jain", "latency_jain",
                       "system_p95_tail_us", "nlos_p95_tail_us"]
METRICS = ["system_throughput_mbps", "nlos_throughput_mbps", "mean_latency_us", "p95_tail_us",
           "throughput_jain", "latency_jain"]
COMPARISON_COLUMNS = (["row_type", "scheduler", "seed"] + METRICS
                      + [f"delta_{m}_pct" for m in METRICS])

_PACKET_FIELDS = ["ue", "packet_id", "size_bits", "arrival_us", "departure_us", "t_queue_us",
                  "t_transmit_us", "t_phy_us", "t_propagate_us", "retx_count"]


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None or math.isnan(value):
        return ""
    return f"{value:.6f}"


def run_id(scenario: Scenario) -> str:
    return f"{scenario.name}-{scenario.policy.value}-s{scenario.seed}"


def packets_rows(rid: str, result: RunResult) -> Iterable[list]:
    assert result.packets.dtype == PACKET_DTYPE
    columns = [result.packets[f].tolist() for f in _PACKET_FIELDS]
    for row in zip(*columns):
        yield [rid, *row]


def ue_summary_rows(rid: str, summary: RunSummary) -> list[list[str]]:
    return [[rid, str(u.ue), str(u.delivered_bits), fmt(u.throughput / 1e6), fmt(u.mean_latency_us),
             fmt(u.p95_tail_latency_us), str(u.drop_count)] for u in summary.ues]


def run_summary_row(rid: str, scenario: Scenario, summary: RunSummary) -> list[str]:
    return [rid, scenario.policy.value, str(scenario.seed), fmt(summary.fairness.throughput_jain),
            fmt(summary.fairness.latency_jain), fmt(summary.system_p95_tail_us),
            fmt(summary.nlos_p95_tail_us)]


def write_csv_atomic(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def config_echo(scenario: Scenario) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "run_id": run_id(scenario),
               "config": scenario_to_config(scenario)}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def trace_rows(rid: str, result: RunResult) -> Iterable[list]:
    for n, (alloc, snaps) in enumerate(zip(result.allocations or [], result.snapshots or [])):
        for s in snaps:
            yield [rid, n, s.ue, int(s.los), f"{s.sinr_db:.3f}", int(s.mcs), s.bits_per_data_symbol,
                   fmt(alloc.priorities.get(s.ue)), alloc.grants.get(s.ue, 0)]


TRACE_COLUMNS = ["run_id", "subframe", "ue", "los", "sinr_db", "mcs", "bits_per_symbol",
                 "priority", "granted_symbols"]


@dataclass(frozen=True)
class RunRecord:
    """What the comparison needs from one finished run."""

    scenario: Scenario
    summary: RunSummary

    def metrics(self) -> dict[str, float]:
        s = self.summary
        return {
            "system_throughput_mbps": s.system_throughput / 1e6,
            "nlos_throughput_mbps": s.nlos_throughput / 1e6,
            "mean_latency_us": s.mean_latency_us,
            "p95_tail_us": s.system_p95_tail_us,
            "throughput_jain": s.fairness.throughput_jain,
            "latency_jain": s.fairness.latency_jain,
        }


def _comparable(sc: Scenario) -> dict[str, Any]:
    cfg = scenario_to_config(sc)
    cfg.pop("scheduler")
    return cfg


def _delta(value: float, base: float) -> float:
    if base == 0 or math.isnan(base) or math.isnan(value):
        return math.nan
    return (value - base) / base * 100.0


def compare_report(groups: Mapping[str, Sequence[RunRecord]], baseline: str = "spf") -> list[dict[str, Any]]:
    """Per-run and aggregate rows for each scheduler, with % deltas vs ``baseline``.

    Every group must hold the same scenarios (seed for seed), differing only
    in the scheduler.
    """
    if len(groups) < 2:
        raise ValueError("comparison needs at least two scheduler groups")
    names = list(groups)
    if baseline not in groups:
        baseline = names[0]
    by_seed = {name: {r.scenario.seed: r for r in runs} for name, runs in groups.items()}
    seeds = sorted(by_seed[baseline])
    for name in names:
        if sorted(by_seed[name]) != seeds:
            raise ValueError(f"scheduler group {name!r} covers different seeds than {baseline!r}")
        for seed in seeds:
            if _comparable(by_seed[name][seed].scenario) != _comparable(by_seed[baseline][seed].scenario):
                raise ValueError(f"scheduler group {name!r} ran a different scenario for seed {seed}")

    rows = []
    aggregates = {}
    for name in names:
        per_seed = [by_seed[name][seed].metrics() for seed in seeds]
        aggregates[name] = {m: float(np.nanmean([p[m] for p in per_seed]))
                            if any(not math.isnan(p[m]) for p in per_seed) else math.nan
                            for m in METRICS}
        for seed, values in zip(seeds, per_seed):
            base = by_seed[baseline][seed].metrics()
            row = {"row_type": "run", "scheduler": name, "seed": seed, **values}
            row.update({f"delta_{m}_pct": _delta(values[m], base[m]) for m in METRICS})
            rows.append(row)
    for name in names:
        row = {"row_type": "aggregate", "scheduler": name, "seed": "all", **aggregates[name]}
        row.update({f"delta_{m}_pct": _delta(aggregates[name][m], aggregates[baseline][m]) for m in METRICS})
        rows.append(row)
    return rows


def comparison_rows(rows: Sequence[Mapping[str, Any]]) -> list[list[str]]:
    out = []
    for r in rows:
        out.append([r["row_type"], r["scheduler"], str(r["seed"])] + [fmt(r[c]) for c in COMPARISON_COLUMNS[3:]])
    return out


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def render_table(rows: Sequence[Mapping[str, Any]]) -> str:
    """Plain-text view of the aggregate comparison rows."""
    buf = io.StringIO()
    agg = [r for r in rows if r["row_type"] == "aggregate"]
    head = ["scheduler", "sys Mbps", "nlos Mbps", "mean us", "p95tail us", "J(thr)", "J(lat)", "d p95 %"]
    buf.write("  ".join(f"{h:>10}" for h in head) + "\n")
    for r in agg:
        vals = [r["scheduler"], r["system_throughput_mbps"], r["nlos_throughput_mbps"], r["mean_latency_us"],
                r["p95_tail_us"], r["throughput_jain"], r["latency_jain"], r["delta_p95_tail_us_pct"]]
        cells = [f"{vals[0]:>10}"] + [f"{v:>10.3f}" if not math.isnan(v) else f"{'-':>10}" for v in vals[1:]]
        buf.write("  ".join(cells) + "\n")
    return buf.getvalue()
