"""Brute-force line-of-sight oracle shared by the channel and acceptance tests."""

import math

import numpy as np

from mmwsched.channel import ObstacleBox
from mmwsched.core import Position


def box(x, y, hw, hh=None):
    return ObstacleBox(Position(x, y), hw, hh if hh is not None else hw)


N_SAMPLES = 10_000
BAND_M = 1e-6


def dense_sampling_blocked(tx, rx, b):
    """Brute force: sample the open segment densely, test closed-rectangle containment."""
    t = (np.arange(N_SAMPLES) + 0.5) / N_SAMPLES
    px = tx[0] + t * (rx[0] - tx[0])
    py = tx[1] + t * (rx[1] - tx[1])
    x0, y0, x1, y1 = b.bounds
    inside = (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
    # margin to the rectangle boundary for every sample (positive inside)
    margin = np.minimum.reduce([px - x0, x1 - px, py - y0, y1 - py])
    return bool(inside.any()), margin


def near_boundary(tx, rx, b, margin):
    """Instances the sampling oracle cannot resolve: the segment's maximal
    penetration depth or its clearance from the box is within the band,
    or every crossing chord is shorter than the sample spacing."""
    seg = math.hypot(rx[0] - tx[0], rx[1] - tx[1])
    spacing = seg / N_SAMPLES
    deepest = margin.max()
    return abs(deepest) <= max(BAND_M, spacing)


def random_instance(rng):
    tx = rng.uniform(0, 20, 2)
    rx = rng.uniform(0, 20, 2)
    b = box(*rng.uniform(2, 18, 2), *rng.uniform(0.2, 4, 2))
    return tx, rx, b
