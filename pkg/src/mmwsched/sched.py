"""Downlink schedulers sharing one greedy symbol-grant loop.

Round Robin, Max Rate, standard proportional fair (SPF), generalized PF
with exponents on the current and average rate (GPF), and enhanced PF
(EPF), which raises the scheduled UE's rate sample to an MCS-dependent
exponent before it enters the average.

All rates are divided by a reference rate ``r_ref`` before any
exponentiation so the arithmetic is unit-free. The default reference is the
channel bandwidth, i.e. normalized rates are spectral efficiencies in
bit/s/Hz. They exceed 1 for all but the lowest few MCS indices, which is
where raising a sample to a power below 1 shrinks it and a power above 1
inflates it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .channel import ChannelSnapshot, LinkBudget, bits_table
from .core import MCS_MAX, MCS_MIN, McsIndex, SubframeConfig, UeId


class Policy(str, enum.Enum):
    RR = "rr"
    MAXRATE = "maxrate"
    SPF = "spf"
    GPF = "gpf"
    EPF = "epf"


@dataclass(frozen=True)
class PfConfig:
    t_c: float = 100.0  # EWMA window in subframes
    alpha: float = 1.0
    beta: float = 1.0
    gamma_mode: str = "mcs"  # "mcs" or "fixed"
    gamma_fixed: float = 1.0
    r_ref: float | None = None  # bit/s; None -> default_r_ref()
    epsilon: float = 1e-6
    r_init: float = 1e-3

    def __post_init__(self):
        if self.t_c < 1:
            raise ValueError("t_c must be >= 1")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.gamma_mode not in ("mcs", "fixed"):
            raise ValueError("gamma_mode must be 'mcs' or 'fixed'")
        if self.gamma_fixed <= 0:
            raise ValueError("gamma_fixed must be positive")
        if self.r_ref is not None and self.r_ref <= 0:
            raise ValueError("r_ref must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.r_init < self.epsilon:
            raise ValueError("r_init must be >= epsilon")


def service_rate(bits_per_symbol: int, cfg: SubframeConfig) -> float:
    """Rate in bit/s if a UE held every data symbol of the subframe."""
    return cfg.data_symbols * bits_per_symbol / (cfg.duration_us * 1e-6)


def default_r_ref(budget: LinkBudget, cfg: SubframeConfig) -> float:
    return float(budget.bandwidth_hz)


def min_r_ref(budget: LinkBudget, cfg: SubframeConfig) -> float:
    return service_rate(int(bits_table(budget, cfg)[MCS_MIN]), cfg)


def peak_r_ref(budget: LinkBudget, cfg: SubframeConfig) -> float:
    return service_rate(int(bits_table(budget, cfg)[MCS_MAX]), cfg)


def instantaneous_rate_norm(snapshot: ChannelSnapshot, cfg: SubframeConfig, pf: PfConfig) -> float:
    if pf.r_ref is None:
        raise ValueError("PfConfig.r_ref must be resolved before use")
    return service_rate(snapshot.bits_per_data_symbol, cfg) / pf.r_ref


def ewma_update(r_prev: float, r_contrib: float, scheduled: bool, t_c: float,
                epsilon: float = 1e-6) -> float:
    keep = 1.0 - 1.0 / t_c
    if scheduled:
        value = keep * r_prev + r_contrib / t_c
    else:
        value = keep * r_prev
    return max(value, epsilon)


def gamma(mcs: int) -> float:
    mcs = McsIndex(mcs)
    return mcs / 28 + 0.5


def epf_contribution(r_norm: float, mcs: int) -> float:
    if r_norm <= 0:
        raise ValueError("rate must be positive")
    return r_norm ** gamma(mcs)


def priority(r_norm: float, avg: float, pf: PfConfig) -> float:
    return r_norm ** pf.alpha / avg ** pf.beta


@dataclass
class UeSchedState:
    avg_rate: float
    scheduled_last: bool = False
    active: bool = False  # has ever had backlog
    last_grant: int = -1  # subframe counter of the last grant


@dataclass
class PfState:
    ues: dict[UeId, UeSchedState]
    subframe: int = 0

    @classmethod
    def for_ues(cls, ues: Iterable[UeId], pf: PfConfig) -> PfState:
        return cls({ue: UeSchedState(pf.r_init) for ue in ues})


@dataclass(frozen=True)
class UeDemand:
    ue: UeId
    backlog_bits: int
    snapshot: ChannelSnapshot


@dataclass
class Allocation:
    grants: dict[UeId, int] = field(default_factory=dict)  # in grant order
    priorities: dict[UeId, float] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.grants.values())


def allocate(demands: Sequence[UeDemand], state: PfState, pf: PfConfig, cfg: SubframeConfig,
             policy: Policy) -> Allocation:
    policy = Policy(policy)
    rates: dict[UeId, float] = {}
    metric: dict[UeId, float] = {}
    backlog: dict[UeId, int] = {}
    alloc = Allocation()
    by_ue = {d.ue: d for d in demands}
    for d in demands:
        if d.ue not in state.ues:
            raise KeyError(f"UE {d.ue} has no scheduler state")
        if d.backlog_bits < 0:
            raise ValueError(f"UE {d.ue} reports negative backlog")
        ue_state = state.ues[d.ue]
        r = instantaneous_rate_norm(d.snapshot, cfg, pf)
        rates[d.ue] = r
        if d.backlog_bits == 0 or d.snapshot.bits_per_data_symbol <= 0:
            continue
        ue_state.active = True
        backlog[d.ue] = d.backlog_bits
        if policy is Policy.RR:
            m = float(state.subframe - ue_state.last_grant)
        elif policy is Policy.MAXRATE:
            m = r
        elif policy is Policy.GPF:
            m = priority(r, ue_state.avg_rate, pf)
        else:
            m = r / ue_state.avg_rate
        metric[d.ue] = m
    alloc.priorities = dict(metric)

    # metrics are frozen within a subframe, so the greedy pick order is a sort
    remaining = cfg.data_symbols
    for ue in sorted(metric, key=lambda u: (-metric[u], u)):
        if remaining == 0:
            break
        bits = by_ue[ue].snapshot.bits_per_data_symbol
        n = min(-(-backlog[ue] // bits), remaining)
        alloc.grants[ue] = n
        remaining -= n

    for ue, s in state.ues.items():
        granted = ue in alloc.grants
        if granted:
            r = rates[ue]
            if policy is Policy.EPF:
                if pf.gamma_mode == "fixed":
                    contrib = r ** pf.gamma_fixed
                else:
                    contrib = epf_contribution(r, by_ue[ue].snapshot.mcs)
            else:
                contrib = r
            s.avg_rate = ewma_update(s.avg_rate, contrib, True, pf.t_c, pf.epsilon)
            s.last_grant = state.subframe
        elif s.active:
            s.avg_rate = ewma_update(s.avg_rate, 0.0, False, pf.t_c, pf.epsilon)
        s.scheduled_last = granted
    state.subframe += 1
    return alloc
