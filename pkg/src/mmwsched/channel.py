"""Geometric blockage channel and link adaptation.

Stand-in for a full statistical mmWave channel: free-space path loss, a
fixed penalty whenever the eNodeB-UE segment crosses a box obstacle, and an
optional AR(1) log-normal shadowing term per UE. SINR is mapped to an MCS
index with a 1 dB staircase and the MCS to a bit load per OFDM symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import MCS_MAX, MCS_MIN, SPEED_OF_LIGHT, McsIndex, Position, SubframeConfig, UeId

THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class ObstacleBox:
    center: Position
    half_width: float
    half_height: float

    def __post_init__(self):
        if self.half_width <= 0 or self.half_height <= 0:
            raise ValueError("obstacle half-extents must be strictly positive")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        return (cx - self.half_width, cy - self.half_height,
                cx + self.half_width, cy + self.half_height)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 30.0
    antenna_gain_dbi: float = 25.0  # combined TX/RX beamforming gain
    noise_figure_db: float = 7.0
    bandwidth_hz: float = 1e9
    carrier_hz: float = 28e9
    nlos_penalty_db: float = 30.0
    shadowing_sigma_db: float = 4.0
    shadowing_corr: float = 0.9
    # spectral efficiency (bit/s/Hz) for MCS 1..28; None selects delta/5
    efficiency_table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.nlos_penalty_db < 0:
            raise ValueError("nlos_penalty_db must be non-negative")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be non-negative")
        if not 0 <= self.shadowing_corr < 1:
            raise ValueError("shadowing_corr must lie in [0, 1)")
        if self.efficiency_table is not None:
            table = self.efficiency_table
            if len(table) != MCS_MAX:
                raise ValueError(f"efficiency_table needs {MCS_MAX} entries")
            if any(v <= 0 for v in table) or any(b < a for a, b in zip(table, table[1:])):
                raise ValueError("efficiency_table must be positive and non-decreasing")

    @property
    def noise_dbm(self) -> float:
        return THERMAL_NOISE_DBM_HZ + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db


@dataclass(frozen=True)
class ChannelSnapshot:
    ue: UeId
    los: bool
    pathloss_db: float
    sinr_db: float
    mcs: McsIndex
    bits_per_data_symbol: int


def boxes_array(obstacles: Sequence[ObstacleBox]) -> np.ndarray:
    """Obstacles as an ``(N, 4)`` array of ``xmin, ymin, xmax, ymax``."""
    if len(obstacles) == 0:
        return np.empty((0, 4))
    return np.array([b.bounds for b in obstacles], dtype=float)


def los_mask(tx: Position, rx: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Vectorised LOS test of segments ``tx -> rx[k]`` against every box.

    Slab clipping on the closed rectangles; a segment is blocked when the
    clipped parameter interval overlaps the open interval (0, 1), so grazing
    a corner or edge counts as blocked.
    """
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    if boxes.shape[0] == 0:
        return np.ones(rx.shape[0], dtype=bool)
    x0, y0 = float(tx[0]), float(tx[1])
    dx = (rx[:, 0] - x0)[:, None]
    dy = (rx[:, 1] - y0)[:, None]
    xmin, ymin, xmax, ymax = (boxes[:, i][None, :] for i in range(4))

    t_lo = np.zeros((rx.shape[0], boxes.shape[0]))
    t_hi = np.ones_like(t_lo)
    outside = np.zeros(t_lo.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for d, p0, lo, hi in ((dx, x0, xmin, xmax), (dy, y0, ymin, ymax)):
            flat = d == 0
            outside |= flat & ((p0 < lo) | (p0 > hi))
            ta = (lo - p0) / d
            tb = (hi - p0) / d
            t_enter = np.where(flat, -np.inf, np.minimum(ta, tb))
            t_exit = np.where(flat, np.inf, np.maximum(ta, tb))
            t_lo = np.maximum(t_lo, t_enter)
            t_hi = np.minimum(t_hi, t_exit)
    # zero-length segments reduce to point-in-box
    point = (dx == 0) & (dy == 0)
    hit = ~outside & np.where(point, True, (t_lo <= t_hi) & (t_hi > 0) & (t_lo < 1))
    return ~hit.any(axis=1)


def is_los(tx: Position, rx: Position, obstacles: Sequence[ObstacleBox]) -> bool:
    if tx[0] == rx[0] and tx[1] == rx[1]:
        raise ValueError("LOS test needs a segment of positive length")
    return bool(los_mask(tx, np.array([rx], dtype=float), boxes_array(obstacles))[0])


def fspl_db(distance_m, carrier_hz):
    return 20 * np.log10(4 * np.pi * np.maximum(distance_m, 1.0) * carrier_hz / SPEED_OF_LIGHT)


def path_loss_db(distance_m: float, budget: LinkBudget, los: bool, shadow_db: float = 0.0) -> float:
    pl = float(fspl_db(distance_m, budget.carrier_hz)) + shadow_db
    if not los:
        pl += budget.nlos_penalty_db
    return pl


def sinr_db(pathloss_db, budget: LinkBudget):
    # single cell: the interference term is zero
    return budget.tx_power_dbm + budget.antenna_gain_dbi - pathloss_db - budget.noise_dbm


def sinr_to_mcs(sinr: float) -> McsIndex:
    if not math.isfinite(sinr):
        raise ValueError("SINR must be finite")
    return McsIndex(min(MCS_MAX, max(MCS_MIN, math.floor(sinr) + 7)))


def sinr_to_mcs_array(sinr: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(sinr) + 7, MCS_MIN, MCS_MAX).astype(np.int64)


def bits_table(budget: LinkBudget, cfg: SubframeConfig) -> np.ndarray:
    """Bits per OFDM symbol indexed by MCS (entry 0 unused)."""
    symbol_s = Fraction(cfg.duration_us, cfg.symbols_total * 1_000_000)
    table = np.zeros(MCS_MAX + 1, dtype=np.int64)
    for mcs in range(MCS_MIN, MCS_MAX + 1):
        if budget.efficiency_table is None:
            eta = Fraction(mcs, 5)
        else:
            eta = Fraction(budget.efficiency_table[mcs - 1])
        table[mcs] = math.floor(eta * Fraction(budget.bandwidth_hz) * symbol_s)
    return table


def mcs_bits_per_symbol(mcs: McsIndex, budget: LinkBudget, cfg: SubframeConfig) -> int:
    return int(bits_table(budget, cfg)[McsIndex(mcs)])


@dataclass
class ShadowState:
    """AR(1) shadowing memory of one UE, in dB."""

    value_db: float = 0.0
    started: bool = False


def advance_shadowing(state: ShadowState, budget: LinkBudget, rng: np.random.Generator) -> float:
    sigma, rho = budget.shadowing_sigma_db, budget.shadowing_corr
    if sigma == 0:
        state.value_db = 0.0
    elif not state.started:
        # first draw from the stationary distribution
        state.value_db = sigma * rng.standard_normal()
    else:
        state.value_db = rho * state.value_db + math.sqrt(1 - rho * rho) * sigma * rng.standard_normal()
    state.started = True
    return state.value_db


def snapshot(ue_pos: Position, enb_pos: Position, obstacles: Sequence[ObstacleBox],
             budget: LinkBudget, cfg: SubframeConfig, shadow_state: ShadowState,
             rng: np.random.Generator, ue: UeId = 0) -> ChannelSnapshot:
    los = bool(los_mask(enb_pos, np.array([ue_pos], dtype=float), boxes_array(obstacles))[0])
    distance = math.hypot(ue_pos[0] - enb_pos[0], ue_pos[1] - enb_pos[1])
    shadow = advance_shadowing(shadow_state, budget, rng)
    pl = path_loss_db(distance, budget, los, shadow)
    sinr = float(sinr_db(pl, budget))
    mcs = sinr_to_mcs(sinr)
    return ChannelSnapshot(ue, los, pl, sinr, mcs, mcs_bits_per_symbol(mcs, budget, cfg))


class ChannelModel:
    """Per-run channel state; evaluates every UE's link once per subframe."""

    def __init__(self, enb: Position, obstacles: Sequence[ObstacleBox], budget: LinkBudget,
                 cfg: SubframeConfig, rngs: Sequence[np.random.Generator],
                 fixed_mcs: Sequence[int | None] | None = None):
        self.enb = enb
        self.boxes = boxes_array(obstacles)
        self.budget = budget
        self.bits = bits_table(budget, cfg)
        self.rngs = list(rngs)
        self.shadow = [ShadowState() for _ in self.rngs]
        n = len(self.rngs)
        fixed = list(fixed_mcs) if fixed_mcs is not None else [None] * n
        self.fixed_mask = np.array([m is not None for m in fixed], dtype=bool)
        self.fixed_values = np.array([m if m is not None else MCS_MIN for m in fixed], dtype=np.int64)

    def step(self, positions: np.ndarray) -> list[ChannelSnapshot]:
        los = los_mask(self.enb, positions, self.boxes)
        dist = np.hypot(positions[:, 0] - self.enb[0], positions[:, 1] - self.enb[1])
        shadow = np.array([advance_shadowing(s, self.budget, g)
                           for s, g in zip(self.shadow, self.rngs)])
        pl = fspl_db(dist, self.budget.carrier_hz) + shadow + np.where(los, 0.0, self.budget.nlos_penalty_db)
        sinr = sinr_db(pl, self.budget)
        mcs = np.where(self.fixed_mask, self.fixed_values, sinr_to_mcs_array(sinr))
        bits = self.bits[mcs]
        return [ChannelSnapshot(k, bool(los[k]), float(pl[k]), float(sinr[k]), McsIndex(int(mcs[k])),
                                int(bits[k]))
                for k in range(len(positions))]
