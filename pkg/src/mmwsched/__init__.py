"""Single-cell mmWave downlink MAC simulator with proportional fair scheduler variants."""

__version__ = "0.1.0"
