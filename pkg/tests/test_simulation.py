"""Tests for the Monte Carlo harness."""

import logging
import math
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from qrwald.dgp import generate_sample
from qrwald.errors import ConfigError, DomainError, EmptyReport, SingularG
from qrwald.schemas import DGPSpec, EGConfig, SimConfig, SimReport, SimRow
from qrwald.simulation import (
    REPORT_COLUMNS,
    density_study,
    emit_report,
    empirical_critical_value,
    parse_sim_config,
    replication_rng,
    run_experiment,
    true_density_at_quantile,
)
from qrwald.wald import wald_test


def _small_config(**overrides):
    settings = {
        "models": [1],
        "sample_sizes": [50],
        "alphas": [0.5],
        "a_values": [0.0, 1.5],
        "methods": ["wiid"],
        "replications": 100,
        "base_seed": 3,
    }
    settings.update(overrides)
    return SimConfig(**settings)


def _row(**overrides):
    values = {
        "model": 1,
        "n": 100,
        "alpha": 0.5,
        "a": 0.0,
        "method": "weg",
        "raw_rejection_pct": 4.5,
        "size_corrected_rejection_pct": 4.5,
        "replications": 1000,
        "cpu_seconds_mean": 0.0123,
        "failures": 0,
    }
    values.update(overrides)
    return SimRow(**values)


def _without_timing(report):
    return [row.model_dump(exclude={"cpu_seconds_mean"}) for row in report.rows]


class TestEmpiricalCriticalValue:
    def test_null_rejection_near_nominal(self):
        stats = np.random.default_rng(0).chisquare(1, 1000)
        for tau in (0.01, 0.05, 0.10):
            crit = empirical_critical_value(stats, tau)
            rate = float(np.mean(stats > crit))
            assert tau - 1.0 / len(stats) <= rate <= tau

    def test_degenerate_level(self):
        assert empirical_critical_value(np.array([1.0, 2.0]), 1.0) == -math.inf

    def test_empty(self):
        assert math.isnan(empirical_critical_value(np.array([]), 0.05))


class TestReplicationStreams:
    def test_matched_across_a(self):
        null = DGPSpec(model=2, a=0.0, alpha_star=0.5, n=40)
        alt = DGPSpec(model=2, a=1.0, alpha_star=0.5, n=40)
        first, _ = generate_sample(null, replication_rng(9, null, 4))
        second, _ = generate_sample(alt, replication_rng(9, alt, 4))
        assert np.array_equal(first.X, second.X)
        assert not np.array_equal(first.y, second.y)

    def test_distinct_replications(self):
        spec = DGPSpec(model=1, n=40)
        a = replication_rng(0, spec, 0).random(5)
        b = replication_rng(0, spec, 1).random(5)
        assert not np.array_equal(a, b)


class TestRunExperiment:
    def test_rows_and_ranges(self):
        report = run_experiment(_small_config(), n_jobs=1)
        assert len(report.rows) == 2
        null, alt = sorted(report.rows, key=lambda row: row.a)
        assert null.size_corrected_rejection_pct == null.raw_rejection_pct
        for row in report.rows:
            assert 0.0 <= row.raw_rejection_pct <= 100.0
            assert 0.0 <= row.size_corrected_rejection_pct <= 100.0
            assert row.replications == 100
            assert row.failures == 0
        assert alt.raw_rejection_pct > null.raw_rejection_pct

    def test_deterministic(self):
        cfg = _small_config(a_values=[0.0])
        assert _without_timing(run_experiment(cfg, n_jobs=1)) == _without_timing(
            run_experiment(cfg, n_jobs=1)
        )

    def test_schedule_independent(self):
        cfg = _small_config(a_values=[0.0])
        assert _without_timing(run_experiment(cfg, n_jobs=1)) == _without_timing(
            run_experiment(cfg, n_jobs=2)
        )

    def test_degenerate_level_always_rejects(self):
        report = run_experiment(_small_config(nominal_tau=1.0), n_jobs=1)
        for row in report.rows:
            assert row.raw_rejection_pct == 100.0
            assert row.size_corrected_rejection_pct == 100.0

    def test_progress_lines(self, caplog):
        with caplog.at_level(logging.INFO, logger="qrwald.simulation"):
            run_experiment(_small_config(a_values=[0.0]), n_jobs=1)
        assert "cell model=1 n=50 alpha=0.50 a=0.00 method=wiid done reps=100 rej=" in caplog.text

    def test_failures_counted(self, caplog):
        with (
            patch("qrwald.simulation.wald_test", side_effect=SingularG("no mass")),
            caplog.at_level(logging.WARNING, logger="qrwald.simulation"),
        ):
            report = run_experiment(_small_config(a_values=[0.0]), n_jobs=1)
        (row,) = report.rows
        assert row.failures == 100
        assert row.status == "all_failed"
        assert row.raw_rejection_pct is None
        assert row.size_corrected_rejection_pct is None
        assert "100 of 100 replications failed" in caplog.text
        assert "rejection rates unavailable (all_failed)" in caplog.text

    def test_failed_null_leaves_power_unavailable(self):
        calls = {"n": 0}

        def fail_first_cell(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] <= 100:
                raise SingularG("no mass")
            return wald_test(*args, **kwargs)

        with patch("qrwald.simulation.wald_test", side_effect=fail_first_cell):
            report = run_experiment(_small_config(), n_jobs=1)
        null, alt = sorted(report.rows, key=lambda row: row.a)
        assert null.status == "all_failed"
        assert alt.status == "null_failed"
        assert alt.raw_rejection_pct is not None
        assert alt.size_corrected_rejection_pct is None

    def test_sample_failure_is_a_failed_replication(self):
        calls = {"n": 0}

        def flaky_sample(spec, rng):
            calls["n"] += 1
            if calls["n"] % 10 == 0:
                raise DomainError("non-finite draw")
            return generate_sample(spec, rng)

        with patch("qrwald.simulation.generate_sample", side_effect=flaky_sample):
            report = run_experiment(_small_config(a_values=[0.0]), n_jobs=1)
        (row,) = report.rows
        assert row.failures == 10
        assert row.status == "ok"
        assert 0.0 <= row.raw_rejection_pct <= 100.0

    def test_oracle_method(self):
        report = run_experiment(
            _small_config(a_values=[0.0], methods=["wiid", "oracle"]), n_jobs=1
        )
        assert {row.method for row in report.rows} == {"wiid", "oracle"}


class TestEmitReport:
    def test_header_and_formatting(self, tmp_path):
        report = SimReport(rows=[_row()])
        path = emit_report(report, tmp_path / "table.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert lines[0] == "model,n,alpha,a,method,raw_pct,size_corrected_pct,reps,cpu_mean_s,failures"
        assert lines[1].startswith("1,100,0.5,0.00,weg,4.5,4.5,1000,")

    def test_round_trip(self, tmp_path):
        path = emit_report(SimReport(rows=[_row(raw_rejection_pct=40.04)]), tmp_path / "t.csv")
        df = pd.read_csv(path)
        assert len(df) == 1
        assert df.loc[0, "raw_pct"] == 40.0
        assert df.loc[0, "method"] == "weg"
        assert df.loc[0, "reps"] == 1000

    def test_sorted(self, tmp_path):
        rows = [
            _row(model=2),
            _row(),
            _row(a=1.0),
            _row(method="wiid", a=0.5),
            _row(a=0.5),
        ]
        df = pd.read_csv(emit_report(SimReport(rows=rows), tmp_path / "t.csv"))
        assert list(zip(df["model"], df["method"], df["a"], strict=True)) == [
            (1, "weg", 0.0),
            (1, "weg", 0.5),
            (1, "weg", 1.0),
            (1, "wiid", 0.5),
            (2, "weg", 0.0),
        ]

    def test_unavailable_rates_left_blank(self, tmp_path):
        rows = [
            _row(
                raw_rejection_pct=None,
                size_corrected_rejection_pct=None,
                failures=1000,
                status="all_failed",
            )
        ]
        path = emit_report(SimReport(rows=rows), tmp_path / "t.csv")
        assert path.read_text().splitlines()[1].startswith("1,100,0.5,0.00,weg,,,1000,")
        df = pd.read_csv(path)
        assert pd.isna(df.loc[0, "raw_pct"])

    def test_percent_out_of_range(self):
        with pytest.raises(ValueError):
            _row(raw_rejection_pct=150.0)

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyReport):
            emit_report(SimReport(rows=[]), tmp_path / "t.csv")


class TestParseSimConfig:
    def test_valid(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text(
            "# size table\n"
            "models = 1, 2\n"
            "sizes = 100,300\n"
            "alphas = 0.25, 0.5, 0.75\n"
            "a_values = 0, 0.5\n"
            "methods = weg, wnid\n"
            "reps = 200\n"
            "seed = 17\n"
            "k = 4\n"
            "c = 2.0\n"
            "level_mode = iid-uniform\n"
        )
        cfg = parse_sim_config(path)
        assert cfg.models == [1, 2]
        assert cfg.sample_sizes == [100, 300]
        assert cfg.methods == ["weg", "wnid"]
        assert cfg.replications == 200
        assert cfg.base_seed == 17
        assert cfg.eg_config == EGConfig(k=4.0, c=2.0, level_mode="iid-uniform")

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("models = 1\nbandwidth = 3\n")
        with pytest.raises(ConfigError) as err:
            parse_sim_config(path)
        assert err.value.key == "bandwidth"

    def test_unknown_method(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("methods = weg, bxy\n")
        with pytest.raises(ConfigError) as err:
            parse_sim_config(path)
        assert err.value.key == "methods"

    def test_too_few_replications(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("reps = 50\n")
        with pytest.raises(ConfigError) as err:
            parse_sim_config(path)
        assert err.value.key == "reps"

    def test_unparseable_value(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("sizes = many\n")
        with pytest.raises(ConfigError) as err:
            parse_sim_config(path)
        assert err.value.key == "sizes"

    def test_kernel_key(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("kernel = epanechnikov-half\n")
        assert parse_sim_config(path).eg_config.kernel == "epanechnikov-half"
        path.write_text("kernel = gaussian\n")
        with pytest.raises(ConfigError) as err:
            parse_sim_config(path)
        assert err.value.key == "kernel"

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "sim.conf"
        path.write_text("models 1\n")
        with pytest.raises(ConfigError):
            parse_sim_config(path)


class TestDensityStudy:
    def test_true_density(self):
        assert true_density_at_quantile(0.5) == pytest.approx(0.3989423, abs=1e-7)
        assert true_density_at_quantile(0.5, "t3") == pytest.approx(
            2.0 / (math.pi * math.sqrt(3.0))
        )

    def test_small_run(self):
        df = density_study([60], [0.5], replications=3, n_jobs=1)
        assert list(df.columns) == [
            "n",
            "alpha",
            "eg_mae",
            "infeasible_mae",
            "feasible_gap",
            "replications",
            "failures",
        ]
        assert df.loc[0, "eg_mae"] >= 0.0

    def test_requires_location_null(self):
        with pytest.raises(ConfigError):
            density_study([60], [0.5], model=3)


# Reference size/power values (tolerances allow for
# Monte Carlo noise at 1000 replications).


@pytest.mark.slow
class TestTableReproduction:
    def test_model1_size(self):
        targets = {(100, 0.25): 5.6, (100, 0.5): 4.5, (100, 0.75): 5.1,
                   (300, 0.25): 5.4, (300, 0.5): 3.2, (300, 0.75): 4.1}
        cfg = SimConfig(
            models=[1],
            sample_sizes=[100, 300],
            alphas=[0.25, 0.5, 0.75],
            a_values=[0.0],
            methods=["weg"],
            replications=1000,
        )
        for row in run_experiment(cfg, n_jobs=-1).rows:
            assert abs(row.raw_rejection_pct - targets[(row.n, row.alpha)]) <= 2.5

    def test_model1_power(self):
        cfg = SimConfig(
            models=[1],
            sample_sizes=[300],
            alphas=[0.5],
            a_values=[0.0, 0.5, 1.0, 1.5],
            methods=["weg"],
            replications=1000,
        )
        rows = sorted(run_experiment(cfg, n_jobs=-1).rows, key=lambda row: row.a)
        power = [row.size_corrected_rejection_pct for row in rows[1:]]
        for got, want in zip(power, (40.0, 84.5, 98.1), strict=True):
            assert abs(got - want) <= 5.0
        assert power[0] < power[1] < power[2]

    def test_cross_model_size(self):
        cfg = SimConfig(
            models=[1, 2, 3, 4, 5, 6],
            sample_sizes=[300],
            alphas=[0.5],
            a_values=[0.0],
            methods=["weg"],
            replications=1000,
        )
        for row in run_experiment(cfg, n_jobs=-1).rows:
            assert 2.0 <= row.raw_rejection_pct <= 8.0

    def test_comparator_size(self):
        cfg = SimConfig(
            models=[1],
            sample_sizes=[300],
            alphas=[0.5],
            a_values=[0.0],
            methods=["wnid", "wker"],
            replications=1000,
        )
        targets = {"wnid": 3.9, "wker": 1.3}
        for row in run_experiment(cfg, n_jobs=-1).rows:
            assert abs(row.raw_rejection_pct - targets[row.method]) <= 3.0

    def test_density_accuracy_trend(self):
        df = density_study([100, 1000], [0.25, 0.5, 0.75], replications=50, n_jobs=-1)
        small = df[df["n"] == 100].set_index("alpha")
        large = df[df["n"] == 1000].set_index("alpha")
        assert (large["eg_mae"] <= 0.05).all()
        assert (large["eg_mae"] < small["eg_mae"]).all()
        assert (large["feasible_gap"] < small["feasible_gap"]).all()
