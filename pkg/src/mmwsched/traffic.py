"""On-Off downlink UDP traffic.

Each UE alternates exponentially distributed OFF periods with fixed-length
ON bursts, starting in OFF. During ON the source emits bits at the peak
rate and a packet arrives each time a full packet's worth of bits has
accumulated. The bit credit carries across bursts so the long-run rate is
exactly the configured average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeUs, UeId


@dataclass(frozen=True)
class OnOffConfig:
    avg_rate: float  # bit/s
    on_duration_us: float = 5.0
    off_mean_us: float = 100.0
    packet_size_bits: int = 12000  # 1500-byte UDP payload

    def __post_init__(self):
        if self.avg_rate <= 0:
            raise ValueError("avg_rate must be positive")
        if self.on_duration_us <= 0:
            raise ValueError("on_duration_us must be positive")
        if self.off_mean_us < 0:
            raise ValueError("off_mean_us must be non-negative")
        if self.packet_size_bits <= 0:
            raise ValueError("packet_size_bits must be positive")


@dataclass(frozen=True)
class Packet:
    id: int
    ue: UeId
    size_bits: int
    arrival_time: TimeUs


def peak_rate(cfg: OnOffConfig) -> float:
    return cfg.avg_rate * (cfg.on_duration_us + cfg.off_mean_us) / cfg.on_duration_us


def draw_off_periods(rng: np.random.Generator, mean_us: float, n: int) -> np.ndarray:
    """Exponential OFF durations by inverse-CDF sampling."""
    return -mean_us * np.log1p(-rng.random(n))


def arrival_times(cfg: OnOffConfig, rng: np.random.Generator, horizon_us: TimeUs) -> np.ndarray:
    """Integer-microsecond arrival instants in ``[0, horizon_us]``.

    Timestamps are the floor of the instant the packet's last bit is
    produced; they strictly increase whenever size/peak exceeds 1 us.
    """
    if horizon_us <= 0:
        raise ValueError("horizon must be positive")
    on = float(cfg.on_duration_us)
    peak_per_us = peak_rate(cfg) * 1e-6

    # burst i starts at sum(off[:i+1]) + i*on
    chunk = max(16, int(2 * horizon_us / (on + cfg.off_mean_us)) + 16)
    offs = np.empty(0)
    while True:
        offs = np.concatenate([offs, draw_off_periods(rng, cfg.off_mean_us, chunk)])
        starts = np.cumsum(offs) + on * np.arange(offs.size)
        if starts[-1] > horizon_us:
            break
    n_bursts = int(np.searchsorted(starts, horizon_us, side="right"))
    if n_bursts == 0:
        return np.empty(0, dtype=np.int64)
    starts = starts[:n_bursts]

    # packet n completes after n*size/peak microseconds of accumulated ON time
    total_on = n_bursts * on
    n_packets = int(total_on * peak_per_us // cfg.packet_size_bits)
    if n_packets == 0:
        return np.empty(0, dtype=np.int64)
    on_clock = np.arange(1, n_packets + 1) * (cfg.packet_size_bits / peak_per_us)
    burst = np.clip(np.ceil(on_clock / on).astype(np.int64) - 1, 0, n_bursts - 1)
    t = starts[burst] + (on_clock - burst * on)
    t = t[t <= horizon_us]
    return np.floor(t).astype(np.int64)


def generate(cfg: OnOffConfig, ue: UeId, rng: np.random.Generator, horizon_us: TimeUs) -> list[Packet]:
    times = arrival_times(cfg, rng, horizon_us)
    return [Packet(i, ue, cfg.packet_size_bits, int(t)) for i, t in enumerate(times)]
