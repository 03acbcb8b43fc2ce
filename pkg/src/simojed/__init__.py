"""Joint channel estimation and data detection for large single-antenna
uplinks, with reference detectors, a bit-exact fixed-point datapath model,
and a reproducible Monte-Carlo harness."""

__version__ = "0.1.0"
