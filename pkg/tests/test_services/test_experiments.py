"""
Tests for the Benchmark Experiments

Small systems on the short interval [0, 2] keep each experiment fast; the
full-size runs are marked slow.
"""

import math

import numpy as np
import pytest

from src.config.settings import Settings
from src.models.experiment import ExperimentConfig, ExperimentName, SweepPoint
from src.models.parameters import CaseLabel
from src.services.experiments import (
    COLUMNS,
    ExperimentRunner,
    exp4_default_M,
    random_state,
)
from src.utils.error_handling import ConfigurationError
from src.utils.monitoring import performance_monitor


@pytest.fixture
def runner() -> ExperimentRunner:
    return ExperimentRunner()


def small_config(experiment: str, **overrides) -> ExperimentConfig:
    """Config on [0, 2] with one timing repetition."""
    data = {
        "experiment": experiment,
        "t0": 0.0,
        "tf": 2.0,
        "repeats": 1,
        "tol": 1e-10,
        "trunc": 1e-12,
    }
    data.update(overrides)
    return ExperimentConfig(**data)


class TestHelpers:
    """Test defaults and seeded inputs."""

    @pytest.mark.parametrize(
        "case,length,expected",
        [
            (CaseLabel.A, 8 * math.pi, 130),
            (CaseLabel.A, 50.2, 210),
            (CaseLabel.A, 100.5, 370),
            (CaseLabel.D, 25.1, 410),
            (CaseLabel.B, 8 * math.pi, 130),
            (CaseLabel.B, 16 * math.pi, 210),
            (CaseLabel.C, 16 * math.pi, 370),
        ],
    )
    def test_exp4_default_M(self, case, length, expected):
        assert exp4_default_M(case, length) == expected

    def test_exp4_default_M_interpolates(self):
        """Lengths between and beyond table rows are interpolated linearly."""
        assert exp4_default_M(CaseLabel.A, 75.35) == 290
        assert exp4_default_M(CaseLabel.D, 100.0) > 1400
        assert exp4_default_M(CaseLabel.A, 1.0) >= 2

    def test_random_state(self):
        """Seeded states are normalized and reproducible."""
        psi0 = random_state(20, 7)
        assert np.linalg.norm(psi0) == pytest.approx(1.0)
        np.testing.assert_array_equal(psi0, random_state(20, 7))
        assert not np.allclose(psi0, random_state(20, 8))


class TestExp1:
    """Test the overlap experiment."""

    def test_star_overlap(self, runner):
        """Overlap rows on the sample grid agree with the oracle."""
        config = small_config("exp1", N=[4], M=40, samples=11)
        result = runner.run(config)

        assert result.columns == COLUMNS[ExperimentName.EXP1]
        assert len(result.rows) == 11
        assert result.rows[0]["t"] == 0.0
        assert result.rows[-1]["t"] == 2.0
        # beta(t0) = ||psi0||^2 = 1
        assert result.rows[0]["re_beta"] == pytest.approx(1.0)
        assert max(row["abs_err"] for row in result.rows) < 1e-8
        assert result.metadata["converged"]
        assert result.metadata["M"] == 40
        assert result.metadata["config"]["samples"] == 11

    def test_rows_are_deterministic(self, runner):
        """Reruns with the same seed give identical data rows."""
        config = small_config("exp1", N=[4], M=24, samples=5)
        assert runner.run(config).rows == runner.run(config).rows

    def test_rk4_method(self, runner):
        """The baseline can be the method under test."""
        config = small_config("exp1", N=[4], samples=5, solver="rk4", steps=[2000])
        result = runner.run(config)
        assert result.metadata["solver"] == "rk4"
        assert result.metadata["accepted_steps"] >= 2000
        assert result.metadata["max_error"] < 1e-8


class TestExp2:
    """Test operator solves across N."""

    def test_small_sizes(self, runner):
        config = small_config("exp2", N=[4, 8], M=40, steps=[2000])
        result = runner.run(config)
        assert [row["N"] for row in result.rows] == [4, 8]
        for row in result.rows:
            assert row["status"] == "ok"
            assert row["converged"]
            assert row["star_error"] < 1e-7
            assert row["unitarity"] < 1e-7
            assert row["baseline_error"] < 1e-8
            assert row["star_time"] == pytest.approx(
                row["discretization_time"] + row["solve_time"]
            )
        assert result.metadata["baseline"] == "rk4"

    def test_failed_cell_is_reported(self):
        """A refused cell becomes a failure row; other cells still run."""
        runner = ExperimentRunner(settings=Settings(dense_cap=4))
        config = small_config("exp2", N=[4, 8], M=24, baseline=False)
        rows = runner.run(config).rows
        assert rows[0]["status"] == "ok"
        assert rows[1]["status"].startswith("failed")


class TestExp3:
    """Test work-precision sweeps."""

    def test_empty_sweep(self, runner):
        """No cells gives an empty result."""
        config = small_config("exp3", N=[4], sweep=[])
        result = runner.run(config)
        assert result.rows == []
        assert result.metadata["stagnation_floor"] is None

    def test_empty_sweep_skips_reference(self, monkeypatch):
        """No cells means no oracle run, even with baselines enabled."""
        runner = ExperimentRunner()
        monkeypatch.setattr(
            runner, "_reference_operator", lambda model: pytest.fail("oracle called")
        )
        assert runner.run(small_config("exp3", N=[4], sweep=[])).rows == []

    def test_mixed_methods(self, runner):
        config = small_config(
            "exp3",
            N=[4],
            sweep=[SweepPoint(M=30, tol=1e-8, trunc=1e-10)],
            steps=[500],
            rtols=[1e-8],
        )
        rows = runner.run(config).rows
        assert [row["method"] for row in rows] == ["star", "rk4", "dp54"]
        assert all(row["status"] == "ok" for row in rows)
        assert all(np.isfinite(row["error"]) for row in rows)
        assert rows[0]["M"] == 30
        assert rows[1]["steps"] == 500
        assert rows[2]["rtol"] == 1e-8


class TestExp4:
    """Test growing intervals."""

    def test_lengths(self, runner):
        config = small_config("exp4", N=[4], M=40, lengths=[1.0, 2.0])
        rows = runner.run(config).rows
        assert [row["tf"] for row in rows] == [1.0, 2.0]
        for row in rows:
            assert row["status"] == "ok"
            assert row["error"] < 1e-7
            assert row["M"] == 40


class TestDiagnostics:
    """Test spectrum, properties and estimator commands."""

    def test_spectrum(self, runner):
        config = small_config("spectrum", N=[4], M=12, ell=[1, 2, 4])
        rows = runner.run(config).rows
        assert [row["quantity"] for row in rows] == [
            "bound", "bound", "bound", "radius", "radius_kronecker",
        ]
        radius, kronecker = rows[3]["value"], rows[4]["value"]
        assert radius == pytest.approx(kronecker, rel=1e-5)
        assert all(row["value"] >= kronecker * (1 - 1e-9) for row in rows[:3])
        assert rows[3]["converged"]
        assert rows[3]["status"] == "ok"

    def test_radius_checked_against_bound(self, runner, monkeypatch):
        """A radius above the l = 256 Frobenius bound is flagged in its row."""
        monkeypatch.setattr(
            runner.analyzer, "spectral_radius_small", lambda disc, model, seed=None: (10.0, True)
        )
        rows = runner.run(small_config("spectrum", N=[4], M=12, ell=[2])).rows
        radius = next(row for row in rows if row["quantity"] == "radius")
        assert radius["status"] == "above bound"

    def test_spectrum_budget(self):
        """Radius cells over the eigen budget are reported, not raised."""
        runner = ExperimentRunner(settings=Settings(eig_budget=10))
        rows = runner.run(small_config("spectrum", N=[4], M=12, ell=[2])).rows
        radius = next(row for row in rows if row["quantity"] == "radius")
        assert radius["status"] == "budget exceeded"
        assert math.isnan(radius["value"])

    def test_spectrum_parallel_matches_serial(self, runner):
        serial = runner.run(small_config("spectrum", N=[4, 6], M=10, ell=[2])).rows
        parallel = runner.run(
            small_config("spectrum", N=[4, 6], M=10, ell=[2], parallel=True)
        ).rows
        assert [(r["N"], r["quantity"]) for r in serial] == [
            (r["N"], r["quantity"]) for r in parallel
        ]
        for a, b in zip(serial, parallel):
            assert a["value"] == pytest.approx(b["value"], rel=1e-6)

    def test_properties(self, runner):
        config = small_config("properties", N=[4, 6, 8], M=32)
        result = runner.run(config)
        assert [row["N"] for row in result.rows] == [4, 6, 8]
        assert result.metadata["rank_bound_ok"]
        assert result.metadata["lemma_ok"]
        assert result.metadata["max_error"] < 1e-7
        assert "nnz_slope" in result.metadata
        assert "iteration_spread" in result.metadata

    def test_estimator(self, runner):
        config = small_config("estimator", N=[4], M=24, tol=1e-8, trunc=1e-10)
        result = runner.run(config)
        assert result.metadata["reference_converged"]
        assert [row["iteration"] for row in result.rows] == list(
            range(1, len(result.rows) + 1)
        )
        first = result.rows[0]
        assert first["true_error"] > 0
        assert first["ratio"] == pytest.approx(first["error_estimate"] / first["true_error"])


class TestConfiguration:
    def test_interval_mixed_with_defaults(self, runner):
        """An explicit tf before the default t0 is refused before any cell runs."""
        with pytest.raises(ConfigurationError):
            runner.run(ExperimentConfig(experiment="exp1", N=[4], tf=-5.0))

    def test_run_is_tracked(self, runner):
        performance_monitor.clear()
        runner.run(small_config("spectrum", N=[4], M=8, ell=[1]))
        summary = performance_monitor.get_metrics_summary("experiment_run_success")
        assert summary["experiment_run_success"]["latest"] == 1


@pytest.mark.slow
class TestFullScale:
    """Default-interval runs at published sizes."""

    def test_exp1_case_a(self, runner):
        """N = 20, M = 130 at tol 1e-7 and trunc 1e-6."""
        config = ExperimentConfig(experiment="exp1", repeats=1, tol=1e-7, trunc=1e-6)
        metadata = runner.run(config).metadata
        assert metadata["converged"]
        assert 13 <= metadata["iterations"] <= 39
        assert 20 <= metadata["max_rank"] <= 45
        assert metadata["max_error"] <= 1e-6

    def test_estimator_case_a(self, runner):
        """The cheap estimate tracks the true error within one order of magnitude."""
        config = ExperimentConfig(experiment="estimator", repeats=1)
        assert runner.run(config).metadata["within_one_order"]

    @pytest.mark.parametrize("case,M", [("b", 140), ("c", 250), ("d", 550)])
    def test_exp1_other_cases(self, runner, case, M):
        config = ExperimentConfig(experiment="exp1", case=case, repeats=1, tol=1e-7, trunc=1e-6)
        metadata = runner.run(config).metadata
        assert metadata["M"] == M
        assert metadata["converged"]
        assert metadata["iterations"] <= 39
        assert metadata["max_rank"] <= M
        assert metadata["max_error"] <= 1e-6

    def test_exp2_scaling_in_N(self, runner):
        """N = 160, 320, 640 at M = 130: flat error, near-linear star time, unitary result."""
        rows = runner.run(ExperimentConfig(experiment="exp2", steps=[4000])).rows
        assert [row["N"] for row in rows] == [160, 320, 640]
        assert all(row["status"] == "ok" and row["converged"] for row in rows)

        errors = [row["star_error"] for row in rows]
        assert max(errors) / min(errors) <= 1.1
        assert rows[2]["star_time"] / rows[0]["star_time"] <= 6.0
        assert rows[2]["baseline_time"] / rows[0]["baseline_time"] >= 10.0
        assert rows[0]["unitarity"] <= 1e-5

    def test_properties_across_N(self, runner):
        """N = 80, 160, 320: stable iteration counts and linear nnz growth."""
        metadata = runner.run(ExperimentConfig(experiment="properties")).metadata
        assert metadata["iteration_spread"] <= 2
        assert metadata["rank_bound_ok"]
        assert metadata["lemma_ok"]
        assert metadata["nnz_slope"] > 0
        assert metadata["nnz_r2"] >= 0.95
        assert metadata["max_error"] <= 1e-6

    def test_exp4_length_50(self, runner):
        rows = runner.run(
            ExperimentConfig(experiment="exp4", lengths=[50.2], repeats=1)
        ).rows
        assert rows[0]["M"] == 210
        assert rows[0]["status"] == "ok"
        assert rows[0]["error"] <= 5e-7

    def test_estimator_case_d(self, runner):
        config = ExperimentConfig(experiment="estimator", case="d", repeats=1)
        metadata = runner.run(config).metadata
        assert metadata["reference_converged"]
        assert metadata["within_one_order"]
