import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from simojed import harness
from simojed.errors import CapacityError, ParameterError
from simojed.harness import (
    MethodSpec,
    SweepConfig,
    db_at_ser,
    hw_compare,
    read_result,
    run_sweep,
    timing_csv,
    timing_report,
    wilson_interval,
)
from simojed.prox import ProxParams
from simojed.tuning import tune_rho


def small_config(**overrides):
    base = dict(
        B=8,
        K=4,
        constellation="bpsk",
        snr_points_db=(-8.0, -4.0),
        trials=60,
        master_seed=11,
        methods=(MethodSpec("prox"), MethodSpec("mrc-chest")),
    )
    base.update(overrides)
    return SweepConfig(**base)


class TestConfig:
    def test_requires_trials(self):
        with pytest.raises(ParameterError):
            small_config(trials=0)

    def test_requires_snr_points(self):
        with pytest.raises(ParameterError):
            small_config(snr_points_db=())

    def test_ml_jed_budget_checked_at_config_time(self):
        with pytest.raises(CapacityError):
            small_config(K=24, constellation="qpsk", methods=(MethodSpec("ml-jed"),))

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            MethodSpec("zf")

    def test_aprox_gets_approx_mode(self):
        spec = MethodSpec("aprox", ProxParams(t_max=3))
        assert spec.solver_params.mode == "approx"
        assert spec.solver_params.t_max == 3

    def test_hash_stable_and_sensitive(self):
        a, b = small_config(), small_config()
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != small_config(trials=61).config_hash()


class TestRunSweep:
    def test_deterministic(self):
        r1 = run_sweep(small_config())
        r2 = run_sweep(small_config())
        assert r1.to_csv() == r2.to_csv()

    def test_method_results_independent_of_method_list(self):
        # Pairing contract: each method consumes the same per-trial blocks
        # no matter which other methods run alongside.
        solo = run_sweep(small_config(methods=(MethodSpec("prox"),)))
        both = run_sweep(small_config())
        for (m, snr), cell in solo.cells.items():
            other = both.cells[(m, snr)]
            assert cell.symbol_errors == other.symbol_errors
            assert cell.downlink_errors == other.downlink_errors
            assert cell.chest_mse == other.chest_mse

    def test_noise_free_ser_zero(self):
        res = run_sweep(small_config(snr_points_db=(300.0,), trials=5))
        for cell in res.cells.values():
            assert cell.symbol_errors == 0
            assert cell.uplink_ser == 0.0
            assert cell.downlink_errors == 0

    def test_worker_count_does_not_change_result(self):
        cfg = small_config(trials=40)
        old = os.environ.get(harness.WORKERS_ENV)
        try:
            os.environ[harness.WORKERS_ENV] = "1"
            serial = run_sweep(cfg)
            os.environ[harness.WORKERS_ENV] = "3"
            parallel = run_sweep(cfg)
        finally:
            if old is None:
                os.environ.pop(harness.WORKERS_ENV, None)
            else:
                os.environ[harness.WORKERS_ENV] = old
        assert serial.to_csv() == parallel.to_csv()
        for key in serial.cells:
            assert serial.cells[key].chest_mse == parallel.cells[key].chest_mse

    def test_all_methods_run(self):
        cfg = small_config(
            methods=(
                MethodSpec("prox"),
                MethodSpec("aprox"),
                MethodSpec("mrc-csir"),
                MethodSpec("mrc-chest"),
                MethodSpec("mrc-rt"),
                MethodSpec("ml-jed"),
            ),
            trials=10,
        )
        res = run_sweep(cfg)
        assert set(res.methods()) == {"prox", "aprox", "mrc-csir", "mrc-chest", "mrc-rt", "ml-jed"}

    def test_los_channel_supported(self):
        from simojed.model import LosGeometry

        res = run_sweep(small_config(channel="los", los=LosGeometry(), trials=10))
        assert len(res.cells) == 4

    def test_approx_mode_tracks_exact_mode(self):
        # The series-approximated preprocessing trades a little accuracy for
        # cheaper setup; on a paired batch its error count stays within a
        # small factor of the exact mode at the same gains.
        cfg = small_config(
            B=16,
            K=8,
            constellation="qpsk",
            snr_points_db=(0.0,),
            trials=800,
            master_seed=31,
            methods=(
                MethodSpec("prox", ProxParams(alpha_scale=2.0, rho_log2=1, t_max=5)),
                MethodSpec("aprox", ProxParams(alpha_scale=2.0, rho_log2=1, t_max=5)),
            ),
        )
        res = run_sweep(cfg)
        exact_errs = res.cells[("prox", 0.0)].symbol_errors
        approx_errs = res.cells[("aprox", 0.0)].symbol_errors
        assert approx_errs <= 4 * exact_errs + 20

    def test_los_qualitative_behavior(self):
        # Line-of-sight blocks: error rate falls with SNR and the solver
        # does not lose to pilot-only detection at the high end.
        from simojed.model import LosGeometry

        cfg = small_config(
            B=16,
            K=8,
            constellation="qpsk",
            channel="los",
            los=LosGeometry(user_distance=30.0, user_angle=0.3),
            snr_points_db=(-8.0, -2.0),
            trials=300,
        )
        res = run_sweep(cfg)
        prox = res.curve("prox")
        chest = res.curve("mrc-chest")
        assert prox[-2.0] <= prox[-8.0]
        assert prox[-2.0] <= chest[-2.0]


class TestCsvRoundTrip:
    def test_round_trip_exact(self):
        res = run_sweep(small_config(trials=30))
        text = res.to_csv()
        back = read_result(text, res.metadata())
        assert back.to_csv() == text
        for key, cell in res.cells.items():
            other = back.cells[key]
            assert cell.symbol_errors == other.symbol_errors
            assert cell.downlink_errors == other.downlink_errors
            assert cell.trials == other.trials
            assert cell.chest_mse == other.chest_mse
            assert cell.uplink_ser == other.uplink_ser
            assert cell.downlink_ser == other.downlink_ser

    def test_header_enforced(self):
        with pytest.raises(ParameterError):
            read_result("bogus\n1,2,3", {"config_hash": "", "master_seed": 0, "version": "",
                                         "data_symbols_per_trial": 1,
                                         "downlink_symbols_per_trial": 1})


class TestStatsHelpers:
    def test_wilson_matches_direct_formula(self):
        z = 1.959963984540054
        k, n = 5, 100
        p = k / n
        denom = 1 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        lo, hi = wilson_interval(k, n)
        assert lo == pytest.approx(center - half)
        assert hi == pytest.approx(center + half)

    def test_wilson_zero_errors(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo == 0.0
        assert 0.0 < hi < 0.005

    def test_wilson_contains_estimate(self):
        for k, n in ((1, 50), (17, 200), (999, 1000)):
            lo, hi = wilson_interval(k, n)
            assert lo <= k / n <= hi

    def test_db_at_ser_log_linear(self):
        # One decade per 2 dB: the 1e-2 crossing sits exactly midway.
        curve = {0.0: 1e-1, 2.0: 1e-3}
        assert db_at_ser(curve, 1e-2) == pytest.approx(1.0)

    def test_db_at_ser_no_crossing(self):
        assert db_at_ser({0.0: 1e-1, 2.0: 2e-2}, 1e-3) is None
        assert db_at_ser({0.0: 0.0, 2.0: 0.0}, 1e-2) is None


class TestHwCompare:
    def test_noise_free_full_agreement(self):
        cfg = small_config(
            snr_points_db=(300.0,),
            trials=10,
            methods=(MethodSpec("prox", ProxParams(rho_log2=1)),),
        )
        report = hw_compare(cfg, agreement_snr_db=300.0)
        assert report.agreement_rate == 1.0

    def test_reports_gap_and_curves(self):
        cfg = small_config(
            K=8,
            snr_points_db=tuple(float(s) for s in range(-10, 1)),
            trials=400,
            methods=(MethodSpec("prox", ProxParams(rho_log2=1)),),
        )
        report = hw_compare(cfg, agreement_snr_db=-6.0, gap_targets=(1e-2,))
        assert 0.9 <= report.agreement_rate <= 1.0
        gap = report.gap_at(1e-2)
        assert gap is not None
        assert abs(gap) < 0.5

    def test_needs_solver_method(self):
        with pytest.raises(ParameterError):
            hw_compare(small_config(methods=(MethodSpec("mrc-chest"),)))


class TestTiming:
    def test_cross_product_rows(self):
        rows = timing_report([4, 8], [1, 3], [100e6], bits_per_symbol=2)
        assert len(rows) == 4
        assert {(r["K"], r["t_max"]) for r in rows} == {(4, 1), (4, 3), (8, 1), (8, 3)}

    def test_csv_shape(self):
        text = timing_csv(timing_report([4], [1], [358e6]))
        lines = text.strip().split("\n")
        assert lines[0] == "K,t_max,f_clk_mhz,latency_cycles,throughput_mbps"
        assert len(lines) == 2


class TestTuning:
    def test_noise_free_tie_breaks_smallest(self):
        best = tune_rho(4, 3, "bpsk", 300.0, trials=5, seed=3)
        assert best.ser == 0.0
        assert best.rho_log2 == 0
        assert best.alpha_scale == 1.25

    def test_tuned_never_worse_than_default_on_batch(self):
        best = tune_rho(8, 4, "bpsk", -6.0, trials=150, seed=4)
        default = tune_rho(8, 4, "bpsk", -6.0, trials=150, seed=4,
                           rho_grid=(1,), alpha_grid=(2.0,))
        assert best.ser <= default.ser

    def test_cache_round_trip(self, tmp_path):
        path = tmp_path / "tuned.json"
        first = tune_rho(4, 3, "bpsk", -4.0, trials=30, seed=5, cache_path=path)
        assert path.exists()
        cached = tune_rho(4, 3, "bpsk", -4.0, trials=1, seed=999, cache_path=path)
        assert cached == first
        data = json.loads(path.read_text())
        assert "B4_K3_bpsk_exact" in data
