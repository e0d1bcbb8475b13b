"""Post-run statistics: throughput, latency, Jain fairness and tail latency."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import UeId
from .engine import RunResult, Scenario


@dataclass(frozen=True)
class UeSummary:
    ue: UeId
    delivered_bits: int
    throughput: float  # bit/s over the whole simulated duration
    mean_latency_us: float  # NaN when nothing was delivered
    p95_tail_latency_us: float
    packet_count: int
    drop_count: int


@dataclass(frozen=True)
class FairnessReport:
    throughput_jain: float
    latency_jain: float


@dataclass(frozen=True)
class RunSummary:
    ues: list[UeSummary]
    fairness: FairnessReport
    system_throughput: float  # mean per-UE throughput, bit/s
    nlos_throughput: float  # mean per-UE throughput over the NLOS group
    mean_latency_us: float  # pooled over every delivered packet
    system_p95_tail_us: float
    nlos_p95_tail_us: float
    queued_packets: int  # censored: still buffered at the end


def jain_index(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("Jain index of an empty list")
    if np.any(x < 0):
        raise ValueError("Jain index needs non-negative values")
    total_sq = float(np.sum(x * x))
    if total_sq == 0:
        raise ValueError("Jain index is undefined when every value is zero")
    return float(np.sum(x)) ** 2 / (x.size * total_sq)


def tail_mean_beyond_p95(latencies_us: Sequence[float]) -> float:
    """Mean of the largest 5% of values (at least one value)."""
    x = np.asarray(latencies_us, dtype=float)
    if x.size == 0:
        raise ValueError("tail latency of an empty sample")
    m = max(1, math.ceil(0.05 * x.size))
    return float(np.mean(np.partition(x, x.size - m)[x.size - m:]))


def summarize(result: RunResult, scenario: Scenario) -> RunSummary:
    pk = result.packets
    n_ues = len(scenario.ues)
    duration_s = result.duration_us * 1e-6
    latency = pk["departure_us"] - pk["arrival_us"]
    delivered = result.delivered_bits()

    ues = []
    for k in range(n_ues):
        lat_k = latency[pk["ue"] == k]
        ues.append(UeSummary(
            ue=k,
            delivered_bits=int(delivered[k]),
            throughput=delivered[k] / duration_s,
            mean_latency_us=float(lat_k.mean()) if lat_k.size else math.nan,
            p95_tail_latency_us=tail_mean_beyond_p95(lat_k) if lat_k.size else math.nan,
            packet_count=int(lat_k.size),
            drop_count=int(result.dropped_packets[k]),
        ))

    throughputs = [u.throughput for u in ues]
    mean_lat = [u.mean_latency_us for u in ues if u.packet_count]
    fairness = FairnessReport(
        throughput_jain=jain_index(throughputs) if any(throughputs) else math.nan,
        latency_jain=jain_index(mean_lat) if mean_lat and any(mean_lat) else math.nan,
    )
    group = list(scenario.nlos_group)
    in_group = np.isin(pk["ue"], group)
    return RunSummary(
        ues=ues,
        fairness=fairness,
        system_throughput=float(np.mean(throughputs)),
        nlos_throughput=float(np.mean([throughputs[k] for k in group])) if group else math.nan,
        mean_latency_us=float(latency.mean()) if latency.size else math.nan,
        system_p95_tail_us=tail_mean_beyond_p95(latency) if latency.size else math.nan,
        nlos_p95_tail_us=tail_mean_beyond_p95(latency[in_group]) if in_group.any() else math.nan,
        queued_packets=int(result.queued_packets.sum()),
    )
