"""Deterministic grid search for the solver gains, with a JSON result cache.

The projection gain and the shift-factor scale are the two knobs the
algorithm leaves open; this searches the documented grid on a seeded paired
batch and keeps the best setting per (B, K, constellation, mode).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Constellation, make_block
from .prox import ProxParams, solve

RHO_LOG2_GRID = tuple(range(0, 7))
ALPHA_SCALE_GRID = (1.25, 1.5, 2.0, 4.0)


@dataclass(frozen=True)
class TunedParams:
    rho_log2: int
    alpha_scale: float
    ser: float


def _cache_key(B: int, K: int, constellation: str, mode: str) -> str:
    return f"B{B}_K{K}_{constellation}_{mode}"


def tune_rho(
    B: int,
    K: int,
    constellation: str,
    snr_db: float,
    trials: int,
    seed: int,
    mode: str = "exact",
    t_max: int = 5,
    rho_grid: tuple[int, ...] = RHO_LOG2_GRID,
    alpha_grid: tuple[float, ...] = ALPHA_SCALE_GRID,
    cache_path: str | Path | None = None,
) -> TunedParams:
    """Grid-search the solver gains on a paired seeded batch.

    Every setting sees byte-identical blocks. Ties in error count break to
    the smallest ``rho_log2``, then the smallest ``alpha_scale``. When a
    cache file is given and already holds this configuration, the cached
    result is returned without re-searching.
    """
    key = _cache_key(B, K, constellation, mode)
    cache: dict = {}
    if cache_path is not None and Path(cache_path).exists():
        cache = json.loads(Path(cache_path).read_text())
        if key in cache:
            hit = cache[key]
            return TunedParams(hit["rho_log2"], hit["alpha_scale"], hit["ser"])

    c = Constellation.by_name(constellation)
    blocks = []
    for t in range(trials):
        ss = np.random.SeedSequence(seed, spawn_key=(t,))
        ch_ss, data_ss, noise_ss = ss.spawn(3)
        blocks.append(
            make_block(
                B,
                K,
                c,
                snr_db,
                np.random.default_rng(ch_ss),
                np.random.default_rng(data_ss),
                np.random.default_rng(noise_ss),
            )
        )

    best: TunedParams | None = None
    for rho_log2 in rho_grid:
        for alpha_scale in alpha_grid:
            params = ProxParams(
                alpha_scale=alpha_scale, rho_log2=rho_log2, t_max=t_max, mode=mode
            )
            errs = 0
            for block in blocks:
                res = solve(block, c, params, record_trace=False)
                errs += int(np.sum(res.s_hat[1:] != block.truth.s_true[1:]))
            ser = errs / (trials * K)
            cand = TunedParams(rho_log2, alpha_scale, ser)
            if (
                best is None
                or cand.ser < best.ser
                or (cand.ser == best.ser and (cand.rho_log2, cand.alpha_scale) < (best.rho_log2, best.alpha_scale))
            ):
                best = cand

    if cache_path is not None:
        cache[key] = {"rho_log2": best.rho_log2, "alpha_scale": best.alpha_scale, "ser": best.ser}
        Path(cache_path).write_text(json.dumps(cache, indent=2, sort_keys=True) + "\n")
    return best
