"""Per-subframe downlink simulation of one cell.

Subframe ``n`` covers ``[n*D, (n+1)*D)``. Packets arriving during it are
buffered, the scheduler decides at ``(n+1)*D`` from CQI that is
``cqi_delay_subframes`` old, and granted data goes out in the slot starting
at that instant using the true current bit load. Every packet departure is
decomposed into queueing, transmission, PHY processing and propagation
time.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import rng as rngs
from .channel import ChannelModel, ChannelSnapshot, LinkBudget, ObstacleBox
from .core import SPEED_OF_LIGHT, Position, SubframeConfig, TimeUs, UeId, Velocity
from .sched import Allocation, PfConfig, PfState, Policy, UeDemand, allocate, default_r_ref
from .traffic import OnOffConfig, arrival_times

PACKET_DTYPE = np.dtype([
    ("packet_id", np.int64),
    ("ue", np.int64),
    ("size_bits", np.int64),
    ("arrival_us", np.int64),
    ("departure_us", np.int64),
    ("t_queue_us", np.int64),
    ("t_transmit_us", np.int64),
    ("t_phy_us", np.int64),
    ("t_propagate_us", np.int64),
    ("retx_count", np.int64),
])


@dataclass(frozen=True)
class HarqConfig:
    bler: float = 0.1
    max_retx: int = 3  # a packet is dropped after this many failed blocks

    def __post_init__(self):
        if not 0 <= self.bler < 1:
            raise ValueError("harq bler must lie in [0, 1)")
        if self.max_retx < 1:
            raise ValueError("harq max_retx must be >= 1")


@dataclass(frozen=True)
class UeSpec:
    position: Position
    velocity: Velocity = Velocity(0.0, 0.0)
    traffic: OnOffConfig | None = None  # None -> scenario-wide traffic
    fixed_mcs: int | None = None  # bypasses link adaptation when set


@dataclass(frozen=True)
class Scenario:
    field_m: tuple[float, float]
    enb: Position
    ues: tuple[UeSpec, ...]
    obstacles: tuple[ObstacleBox, ...]
    traffic: OnOffConfig
    budget: LinkBudget = LinkBudget()
    subframe: SubframeConfig = SubframeConfig()
    pf: PfConfig = PfConfig()
    policy: Policy = Policy.SPF
    duration_us: int = 1_000_000
    cqi_delay_subframes: int = 1
    harq: HarqConfig = HarqConfig()
    t_phy_us: int = 10
    seed: int = 0
    nlos_group: tuple[UeId, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        width, height = self.field_m
        if width <= 0 or height <= 0:
            raise ValueError("field dimensions must be positive")
        if not self.ues:
            raise ValueError("scenario needs at least one UE")
        if self.duration_us <= 0 or self.duration_us % self.subframe.duration_us:
            raise ValueError("duration must be a positive multiple of the subframe duration")
        if self.cqi_delay_subframes < 0:
            raise ValueError("cqi_delay_subframes must be >= 0")
        if self.t_phy_us < 0:
            raise ValueError("t_phy_us must be >= 0")
        inside = lambda p: 0 <= p[0] <= width and 0 <= p[1] <= height  # noqa: E731
        if not inside(self.enb):
            raise ValueError("eNodeB lies outside the field")
        for k, ue in enumerate(self.ues):
            if not inside(ue.position):
                raise ValueError(f"UE {k} starts outside the field")
            if ue.fixed_mcs is not None and not 1 <= ue.fixed_mcs <= 28:
                raise ValueError(f"UE {k} fixed MCS {ue.fixed_mcs} outside [1, 28]")
        for box in self.obstacles:
            x0, y0, x1, y1 = box.bounds
            if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
                raise ValueError(f"obstacle at {tuple(box.center)} extends outside the field")
        if any(not 0 <= k < len(self.ues) for k in self.nlos_group):
            raise ValueError("nlos_group names an unknown UE")
        object.__setattr__(self, "policy", Policy(self.policy))

    @property
    def n_subframes(self) -> int:
        return self.duration_us // self.subframe.duration_us

    def resolved_pf(self) -> PfConfig:
        if self.pf.r_ref is not None:
            return self.pf
        from dataclasses import replace
        return replace(self.pf, r_ref=default_r_ref(self.budget, self.subframe))

    def ue_traffic(self, k: UeId) -> OnOffConfig:
        return self.ues[k].traffic or self.traffic


@dataclass(frozen=True)
class PacketRecord:
    packet_id: int
    ue: UeId
    size_bits: int
    arrival: TimeUs
    departure: TimeUs
    t_queue: TimeUs
    t_transmit: TimeUs
    t_phy: TimeUs
    t_propagate: TimeUs
    retx_count: int = 0


@dataclass
class RunResult:
    packets: np.ndarray  # PACKET_DTYPE, in departure order
    generated_packets: np.ndarray  # per UE
    generated_bits: np.ndarray
    dropped_packets: np.ndarray
    dropped_bits: np.ndarray
    queued_packets: np.ndarray
    queued_bits: np.ndarray  # full size of packets still buffered
    queued_remaining_bits: np.ndarray  # untransmitted bits still buffered
    duration_us: int
    allocations: list[Allocation] | None = None
    snapshots: list[list[ChannelSnapshot]] | None = None

    @property
    def dropped(self) -> int:
        return int(self.dropped_packets.sum())

    def delivered_bits(self) -> np.ndarray:
        return np.bincount(self.packets["ue"], weights=self.packets["size_bits"],
                           minlength=len(self.generated_bits)).astype(np.int64)

    def records(self) -> Iterator[PacketRecord]:
        for row in self.packets.tolist():
            yield PacketRecord(*row)


def update_mobility(pos, vel, dt: float, bounds: tuple[float, float]):
    """Uniform linear motion with specular reflection at the field edges.

    Works on a single ``(x, y)`` pair or on ``(K, 2)`` arrays.
    """
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    size = np.asarray(bounds, dtype=float)
    raw = pos + vel * dt
    folded = np.mod(raw, 2 * size)
    new_pos = np.where(folded > size, 2 * size - folded, folded)
    bounces = np.floor(raw / size).astype(np.int64)
    new_vel = np.where(bounces % 2 == 1, -vel, vel)
    return new_pos, new_vel


class _UeQueue:
    """FIFO of ``[packet_id, remaining_bits, failures, arrival, size]`` entries.

    The retransmission sub-queue is always served first.
    """

    __slots__ = ("main", "retx", "bits_pending")

    def __init__(self):
        self.main: deque[list[int]] = deque()
        self.retx: deque[list[int]] = deque()
        self.bits_pending = 0

    def head(self) -> Iterator[list[int]]:
        yield from self.retx
        yield from self.main

    def pop_head(self) -> list[int]:
        return self.retx.popleft() if self.retx else self.main.popleft()


def run(scenario: Scenario, trace: bool = False) -> RunResult:
    sc = scenario
    sf = sc.subframe
    pf = sc.resolved_pf()
    n_ues = len(sc.ues)
    dur = sf.duration_us
    harq = sc.harq

    pos = np.array([u.position for u in sc.ues], dtype=float)
    vel = np.array([u.velocity for u in sc.ues], dtype=float)
    bounds = tuple(float(v) for v in sc.field_m)
    channel = ChannelModel(sc.enb, sc.obstacles, sc.budget, sf,
                           [rngs.stream(sc.seed, "shadowing", k) for k in range(n_ues)],
                           [u.fixed_mcs for u in sc.ues])
    harq_rng = [rngs.stream(sc.seed, "harq", k) for k in range(n_ues)]

    horizon = sc.n_subframes * dur - 1
    arrivals = [arrival_times(sc.ue_traffic(k), rngs.stream(sc.seed, "traffic", k), horizon)
                for k in range(n_ues)]
    sizes = [sc.ue_traffic(k).packet_size_bits for k in range(n_ues)]
    id_base = np.concatenate([[0], np.cumsum([a.size for a in arrivals])])
    next_arrival = [0] * n_ues
    arrivals_list = [a.tolist() for a in arrivals]

    queues = [_UeQueue() for _ in range(n_ues)]
    state = PfState.for_ues(range(n_ues), pf)
    history: deque[list[ChannelSnapshot]] = deque(maxlen=sc.cqi_delay_subframes + 1)

    out: list[tuple[int, ...]] = []
    dropped_packets = np.zeros(n_ues, dtype=np.int64)
    dropped_bits = np.zeros(n_ues, dtype=np.int64)
    alloc_trace: list[Allocation] | None = [] if trace else None
    snap_trace: list[list[ChannelSnapshot]] | None = [] if trace else None

    for n in range(sc.n_subframes):
        grant_time = (n + 1) * dur
        if n > 0:
            pos, vel = update_mobility(pos, vel, dur * 1e-6, bounds)
        snaps = channel.step(pos)
        history.append(snaps)
        seen = history[0]
        if snap_trace is not None:
            snap_trace.append(snaps)

        for k in range(n_ues):
            times = arrivals_list[k]
            i = next_arrival[k]
            q = queues[k]
            size = sizes[k]
            while i < len(times) and times[i] < grant_time:
                q.main.append([int(id_base[k]) + i, size, 0, times[i], size])
                q.bits_pending += size
                i += 1
            next_arrival[k] = i

        demands = [UeDemand(k, queues[k].bits_pending, seen[k]) for k in range(n_ues)]
        alloc = allocate(demands, state, pf, sf, sc.policy)
        if alloc_trace is not None:
            alloc_trace.append(alloc)

        for k, n_sym in alloc.grants.items():
            q = queues[k]
            bits = snaps[k].bits_per_data_symbol
            block = min(q.bits_pending, n_sym * bits)
            if block <= 0:
                continue
            if harq.bler > 0 and harq_rng[k].random() < harq.bler:
                _fail_block(q, block, harq.max_retx, k, dropped_packets, dropped_bits)
                continue
            distance = math.hypot(pos[k, 0] - sc.enb[0], pos[k, 1] - sc.enb[1])
            t_prop = max(0, math.ceil(distance / SPEED_OF_LIGHT * 1e6))
            sent = 0
            while sent < block:
                p = q.retx[0] if q.retx else q.main[0]
                take = min(p[1], block - sent)
                sent += take
                p[1] -= take
                if p[1]:
                    break
                q.pop_head()
                t_tx = sf.symbols_to_us(-(-sent // bits))
                t_queue = grant_time - p[3]
                out.append((p[0], k, p[4], p[3], grant_time + t_tx + sc.t_phy_us + t_prop,
                            t_queue, t_tx, sc.t_phy_us, t_prop, p[2]))
            q.bits_pending -= block

    packets = np.array(out, dtype=PACKET_DTYPE) if out else np.empty(0, dtype=PACKET_DTYPE)
    generated_packets = np.array([next_arrival[k] for k in range(n_ues)], dtype=np.int64)
    queued_packets = np.array([len(q.main) + len(q.retx) for q in queues], dtype=np.int64)
    queued_bits = np.array([sum(p[4] for p in q.head()) for q in queues], dtype=np.int64)
    return RunResult(
        packets=packets,
        generated_packets=generated_packets,
        generated_bits=np.array([next_arrival[k] * sizes[k] for k in range(n_ues)], dtype=np.int64),
        dropped_packets=dropped_packets,
        dropped_bits=dropped_bits,
        queued_packets=queued_packets,
        queued_bits=queued_bits,
        queued_remaining_bits=np.array([q.bits_pending for q in queues], dtype=np.int64),
        duration_us=sc.duration_us,
        allocations=alloc_trace,
        snapshots=snap_trace,
    )


def _fail_block(q: _UeQueue, block: int, max_retx: int, ue: UeId,
                dropped_packets: np.ndarray, dropped_bits: np.ndarray) -> None:
    """Failed transport block: every packet it carried is retried or dropped."""
    touched = []
    covered = 0
    while covered < block:
        p = q.pop_head()
        covered += p[1]
        touched.append(p)
    for p in reversed(touched):
        p[2] += 1
        if p[2] >= max_retx:
            q.bits_pending -= p[1]
            dropped_packets[ue] += 1
            dropped_bits[ue] += p[4]
        else:
            q.retx.appendleft(p)
