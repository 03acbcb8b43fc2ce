"""Monte-Carlo sweep engine: seeded paired trials, aggregation, CSV/JSON
output, fixed-vs-float comparison, and the timing table.

Every trial draws its channel, data, and noise from substreams spawned off
the master seed by (snr index, trial index), so results are bit-identical
for a given seed regardless of how trials are distributed over workers.
All methods in a sweep consume the same blocks (paired comparison), and the
downlink evaluation reuses one noise seed per trial across methods.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .baselines import (
    ML_JED_DEFAULT_BUDGET,
    downlink_ser,
    ml_jed_exhaustive,
    mrc_chest,
    mrc_csir,
    mrc_retrained,
)
from .errors import CapacityError, ParameterError
from .fxp import latency_cycles, solve_fixed, throughput_bps
from .model import Constellation, LosGeometry, make_block, snr_to_n0
from .prox import ProxParams, channel_estimate, solve

WORKERS_ENV = "SIMOJED_WORKERS"
_TRIAL_CHUNK = 512  # fixed reduction granularity keeps float sums worker-independent

METHOD_NAMES = ("prox", "aprox", "mrc-csir", "mrc-chest", "mrc-rt", "ml-jed")

CSV_COLUMNS = "method,snr_db,uplink_ser,downlink_ser,chest_mse,trials,errors,ci_lo,ci_hi"


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: ProxParams | None = None

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ParameterError(f"unknown method {self.name!r}; choose from {METHOD_NAMES}")
        if self.name in ("prox", "aprox") and self.params is None:
            object.__setattr__(self, "params", ProxParams())

    @property
    def solver_params(self) -> ProxParams | None:
        if self.name == "prox":
            return self.params
        if self.name == "aprox":
            return replace(self.params, mode="approx")
        return None


@dataclass(frozen=True)
class SweepConfig:
    B: int
    K: int
    constellation: str
    snr_points_db: tuple[float, ...]
    trials: int
    master_seed: int
    methods: tuple[MethodSpec, ...]
    channel: str = "rayleigh"
    los: LosGeometry | None = None
    arithmetic: str = "float"
    downlink_symbols: int | None = None  # defaults to K
    ml_jed_budget: int = ML_JED_DEFAULT_BUDGET

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("need at least one trial")
        if not self.snr_points_db:
            raise ParameterError("need at least one SNR point")
        if self.K < 1:
            raise ParameterError("need at least one data slot")
        if self.channel not in ("rayleigh", "los"):
            raise ParameterError(f"unknown channel {self.channel!r}")
        if self.arithmetic not in ("float", "fixed"):
            raise ParameterError(f"unknown arithmetic {self.arithmetic!r}")
        c = Constellation.by_name(self.constellation)
        for m in self.methods:
            if m.name == "ml-jed" and len(c.points) ** self.K > self.ml_jed_budget:
                raise CapacityError(
                    f"ml-jed with K={self.K} and {self.constellation} exceeds the "
                    f"enumeration budget {self.ml_jed_budget}"
                )

    def config_hash(self) -> str:
        canon = json.dumps(_config_dict(self), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _config_dict(cfg: SweepConfig) -> dict:
    d = asdict(cfg)
    d["methods"] = [
        {"name": m.name, "params": (asdict(m.params) if m.params else None)}
        for m in cfg.methods
    ]
    return d


@dataclass
class SweepCell:
    """Aggregates for one (method, snr) point."""

    method: str
    snr_db: float
    trials: int
    symbol_errors: int
    downlink_errors: int
    chest_mse: float
    data_symbols: int
    downlink_symbols: int

    @property
    def uplink_ser(self) -> float:
        return self.symbol_errors / self.data_symbols

    @property
    def downlink_ser(self) -> float:
        return self.downlink_errors / self.downlink_symbols

    def wilson_interval(self, z: float = 1.959963984540054) -> tuple[float, float]:
        return wilson_interval(self.symbol_errors, self.data_symbols, z)


@dataclass
class SweepResult:
    config_hash: str
    master_seed: int
    version: str
    cells: dict[tuple[str, float], SweepCell] = field(default_factory=dict)

    def methods(self) -> list[str]:
        seen = []
        for m, _ in self.cells:
            if m not in seen:
                seen.append(m)
        return seen

    def snrs(self) -> list[float]:
        return sorted({s for _, s in self.cells})

    def curve(self, method: str, quantity: str = "uplink_ser") -> dict[float, float]:
        return {
            snr: getattr(cell, quantity)
            for (m, snr), cell in sorted(self.cells.items(), key=lambda kv: kv[0][1])
            if m == method
        }

    def to_csv(self) -> str:
        lines = [CSV_COLUMNS]
        for (m, snr), cell in sorted(self.cells.items()):
            lo, hi = cell.wilson_interval()
            lines.append(
                f"{m},{snr!r},{cell.uplink_ser!r},{cell.downlink_ser!r},"
                f"{cell.chest_mse!r},{cell.trials},{cell.symbol_errors},{lo!r},{hi!r}"
            )
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        some_cell = next(iter(self.cells.values()), None)
        return {
            "config_hash": self.config_hash,
            "master_seed": self.master_seed,
            "version": self.version,
            "trials": some_cell.trials if some_cell else 0,
            "data_symbols_per_trial": (
                some_cell.data_symbols // some_cell.trials if some_cell else 0
            ),
            "downlink_symbols_per_trial": (
                some_cell.downlink_symbols // some_cell.trials if some_cell else 0
            ),
        }


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def db_at_ser(curve: dict[float, float], target: float) -> float | None:
    """SNR at which the curve crosses ``target``, by log-linear interpolation
    between adjacent sweep points; None when the curve never crosses."""
    pts = sorted(curve.items())
    for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
        if y1 >= target > y2 and y1 > 0 and y2 > 0:
            return x1 + (x2 - x1) * math.log(y1 / target) / math.log(y1 / y2)
    return None


def _eval_method(spec: MethodSpec, block, c, arithmetic: str):
    """Detect one block with one method; returns (s_hat, h_hat)."""
    if spec.name in ("prox", "aprox"):
        params = spec.solver_params
        if arithmetic == "fixed":
            s_hat = solve_fixed(block, c, params)
            return s_hat, channel_estimate(block.Y, s_hat)
        res = solve(block, c, params, record_trace=False)
        return res.s_hat, res.h_hat
    if spec.name == "mrc-csir":
        r = mrc_csir(block, block.truth.h_true, c)
    elif spec.name == "mrc-chest":
        r = mrc_chest(block, c=c)
    elif spec.name == "mrc-rt":
        r = mrc_retrained(block, c=c)
    else:
        r = ml_jed_exhaustive(block, c)
    return r.s_hat, r.h_hat


def _run_chunk(cfg: SweepConfig, snr_index: int, trial_lo: int, trial_hi: int):
    """Counts for trials [trial_lo, trial_hi) at one SNR point.

    Returns per-method integer error counts and the per-trial channel-MSE
    array (summed later in fixed order for worker-count independence).
    """
    c = Constellation.by_name(cfg.constellation)
    snr_db = cfg.snr_points_db[snr_index]
    n0 = snr_to_n0(snr_db, c)
    n_dl = cfg.downlink_symbols or cfg.K
    ul = {m.name: 0 for m in cfg.methods}
    dl = {m.name: 0 for m in cfg.methods}
    mse = {m.name: np.zeros(trial_hi - trial_lo) for m in cfg.methods}
    for t in range(trial_lo, trial_hi):
        ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(snr_index, t))
        ch_ss, data_ss, noise_ss, dl_ss = ss.spawn(4)
        block = make_block(
            cfg.B,
            cfg.K,
            c,
            snr_db,
            np.random.default_rng(ch_ss),
            np.random.default_rng(data_ss),
            np.random.default_rng(noise_ss),
            los=cfg.los if cfg.channel == "los" else None,
        )
        truth = block.truth
        data_true = truth.s_true[1:]
        for spec in cfg.methods:
            s_hat, h_hat = _eval_method(spec, block, c, cfg.arithmetic)
            ul[spec.name] += int(np.sum(s_hat[1:] != data_true))
            frac = downlink_ser(
                truth.h_true, h_hat, c, n_dl, n0, np.random.default_rng(dl_ss)
            )
            dl[spec.name] += int(round(frac * n_dl))
            mse[spec.name][t - trial_lo] = float(
                np.sum(np.abs(h_hat - truth.h_true) ** 2) / cfg.B
            )
    return snr_index, trial_lo, ul, dl, mse


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run the full paired sweep; deterministic for a given master seed
    regardless of the worker count."""
    jobs = []
    for snr_index in range(len(cfg.snr_points_db)):
        for lo in range(0, cfg.trials, _TRIAL_CHUNK):
            jobs.append((snr_index, lo, min(lo + _TRIAL_CHUNK, cfg.trials)))

    workers = _worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_chunk_star, [(cfg, *j) for j in jobs], chunksize=1))
    else:
        outputs = [_run_chunk(cfg, *j) for j in jobs]

    # Assemble in (snr, trial) order so float reductions are identical for
    # any worker count.
    outputs.sort(key=lambda o: (o[0], o[1]))
    result = SweepResult(
        config_hash=cfg.config_hash(), master_seed=cfg.master_seed, version=__version__
    )
    n_dl = cfg.downlink_symbols or cfg.K
    for snr_index, snr_db in enumerate(cfg.snr_points_db):
        chunks = [o for o in outputs if o[0] == snr_index]
        for spec in cfg.methods:
            ul = sum(o[2][spec.name] for o in chunks)
            dl = sum(o[3][spec.name] for o in chunks)
            mse_parts = [float(np.sum(o[4][spec.name])) for o in chunks]
            result.cells[(spec.name, snr_db)] = SweepCell(
                method=spec.name,
                snr_db=snr_db,
                trials=cfg.trials,
                symbol_errors=ul,
                downlink_errors=dl,
                chest_mse=math.fsum(mse_parts) / cfg.trials,
                data_symbols=cfg.trials * cfg.K,
                downlink_symbols=cfg.trials * n_dl,
            )
    return result


def _run_chunk_star(args):
    return _run_chunk(*args)


def read_result(csv_text: str, metadata: dict) -> SweepResult:
    """Rebuild a SweepResult from its CSV plus the JSON sidecar.

    Error counts are exact integers in the CSV; the per-trial symbol counts
    come from the sidecar, so a write/read cycle reproduces every cell.
    """
    lines = [ln for ln in csv_text.strip().split("\n") if ln]
    if lines[0] != CSV_COLUMNS:
        raise ParameterError("unexpected CSV header")
    result = SweepResult(
        config_hash=metadata["config_hash"],
        master_seed=metadata["master_seed"],
        version=metadata["version"],
    )
    per_trial_data = metadata["data_symbols_per_trial"]
    per_trial_dl = metadata["downlink_symbols_per_trial"]
    for ln in lines[1:]:
        m, snr, _ul_ser, dl_ser, mse, trials, errors, _lo, _hi = ln.split(",")
        trials_i = int(trials)
        dl_symbols = trials_i * per_trial_dl
        result.cells[(m, float(snr))] = SweepCell(
            method=m,
            snr_db=float(snr),
            trials=trials_i,
            symbol_errors=int(errors),
            downlink_errors=int(round(float(dl_ser) * dl_symbols)),
            chest_mse=float(mse),
            data_symbols=trials_i * per_trial_data,
            downlink_symbols=dl_symbols,
        )
    return result


@dataclass
class HwCompareReport:
    agreement_rate: float
    float_result: SweepResult
    fixed_result: SweepResult
    gap_db_at: dict[float, float | None]

    def gap_at(self, target: float) -> float | None:
        return self.gap_db_at.get(target)


def hw_compare(
    cfg: SweepConfig,
    agreement_snr_db: float | None = None,
    gap_targets: tuple[float, ...] = (1e-2,),
) -> HwCompareReport:
    """Paired float-vs-fixed comparison for the solver methods in ``cfg``.

    Runs the same seeded sweep in both arithmetics, measures the
    hard-decision agreement rate at one SNR point (the sweep's midpoint by
    default), and the horizontal dB gap between the two SER curves at the
    requested targets.
    """
    solver_methods = [m for m in cfg.methods if m.name in ("prox", "aprox")]
    if not solver_methods:
        raise ParameterError("hw_compare needs a prox or aprox method in the config")
    float_cfg = replace(cfg, arithmetic="float")
    fixed_cfg = replace(cfg, arithmetic="fixed")
    float_res = run_sweep(float_cfg)
    fixed_res = run_sweep(fixed_cfg)

    snr_db = agreement_snr_db
    if snr_db is None:
        snr_db = cfg.snr_points_db[len(cfg.snr_points_db) // 2]
    agreement = _decision_agreement(cfg, solver_methods[0], snr_db)

    name = solver_methods[0].name
    gaps: dict[float, float | None] = {}
    for target in gap_targets:
        f_db = db_at_ser(float_res.curve(name), target)
        x_db = db_at_ser(fixed_res.curve(name), target)
        gaps[target] = None if f_db is None or x_db is None else x_db - f_db
    return HwCompareReport(
        agreement_rate=agreement,
        float_result=float_res,
        fixed_result=fixed_res,
        gap_db_at=gaps,
    )


def _decision_agreement(cfg: SweepConfig, spec: MethodSpec, snr_db: float) -> float:
    """Fraction of mutually agreeing hard decisions on paired blocks."""
    c = Constellation.by_name(cfg.constellation)
    try:
        snr_index = cfg.snr_points_db.index(snr_db)
    except ValueError:
        snr_index = 0
        snr_db = cfg.snr_points_db[0]
    agree = total = 0
    for t in range(cfg.trials):
        ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(snr_index, t))
        ch_ss, data_ss, noise_ss, _ = ss.spawn(4)
        block = make_block(
            cfg.B,
            cfg.K,
            c,
            snr_db,
            np.random.default_rng(ch_ss),
            np.random.default_rng(data_ss),
            np.random.default_rng(noise_ss),
            los=cfg.los if cfg.channel == "los" else None,
        )
        s_float, _ = _eval_method(spec, block, c, "float")
        s_fixed, _ = _eval_method(spec, block, c, "fixed")
        agree += int(np.sum(s_float[1:] == s_fixed[1:]))
        total += cfg.K
    return agree / total


def timing_report(
    K_list: list[int],
    t_max_list: list[int],
    f_clk_list: list[float],
    bits_per_symbol: int = 2,
) -> list[dict]:
    """Latency/throughput for every (K, t_max, f_clk) combination."""
    rows = []
    for K in K_list:
        for t_max in t_max_list:
            for f_clk in f_clk_list:
                rows.append(
                    {
                        "K": K,
                        "t_max": t_max,
                        "f_clk_mhz": f_clk / 1e6,
                        "latency_cycles": latency_cycles(K, t_max),
                        "throughput_mbps": throughput_bps(K, t_max, f_clk, bits_per_symbol)
                        / 1e6,
                    }
                )
    return rows


def timing_csv(rows: list[dict]) -> str:
    header = "K,t_max,f_clk_mhz,latency_cycles,throughput_mbps"
    lines = [header] + [
        f"{r['K']},{r['t_max']},{r['f_clk_mhz']!r},{r['latency_cycles']},{r['throughput_mbps']!r}"
        for r in rows
    ]
    return "\n".join(lines) + "\n"
