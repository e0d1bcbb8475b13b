"""Shared vocabulary: time, geometry, MCS indices and the subframe layout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

MCS_MIN = 1
MCS_MAX = 28
SPEED_OF_LIGHT = 2.998e8  # m/s

TimeUs = int
UeId = int


class Position(NamedTuple):
    x: float
    y: float


class Velocity(NamedTuple):
    x: float
    y: float


class McsIndex(int):
    """Integer MCS index restricted to ``[1, 28]``."""

    def __new__(cls, value):
        if isinstance(value, bool) or int(value) != value:
            raise ValueError(f"MCS index must be an integer, got {value!r}")
        value = int(value)
        if not MCS_MIN <= value <= MCS_MAX:
            raise ValueError(f"MCS index {value} outside [{MCS_MIN}, {MCS_MAX}]")
        return super().__new__(cls, value)


def time_us(value) -> TimeUs:
    """Validate a non-negative integer microsecond timestamp."""
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ValueError(f"time must be a non-negative integer of microseconds, got {value!r}")
    return int(value)


def elapsed_us(later: TimeUs, earlier: TimeUs) -> TimeUs:
    """``later - earlier``; never wraps, raises when the order is reversed."""
    if later < earlier:
        raise ValueError(f"time {later} us precedes {earlier} us")
    return later - earlier


@dataclass(frozen=True)
class SubframeConfig:
    duration_us: int = 100
    symbols_total: int = 24
    control_symbols: int = 2  # one DL + one UL control symbol

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ValueError("subframe duration must be positive")
        if self.symbols_total <= 0:
            raise ValueError("symbols_total must be positive")
        if not 0 <= self.control_symbols < self.symbols_total:
            raise ValueError("control_symbols must lie in [0, symbols_total)")

    @property
    def data_symbols(self) -> int:
        return self.symbols_total - self.control_symbols

    @property
    def symbol_duration_s(self) -> float:
        return self.duration_us * 1e-6 / self.symbols_total

    def symbols_to_us(self, n_symbols: int) -> int:
        """Airtime of ``n_symbols`` rounded up to whole microseconds."""
        return -(-n_symbols * self.duration_us // self.symbols_total)


def subframe_data_symbols(cfg: SubframeConfig) -> int:
    return cfg.symbols_total - cfg.control_symbols
