"""Tests for Wald statistics and p-value curves."""

import logging
from unittest.mock import patch

import numpy as np
import pytest

from qrwald.density import compute_H, weighted_gram
from qrwald.dgp import generate_sample
from qrwald.errors import DomainError, EmptyGrid, SingularG, SingularW
from qrwald.numerics import chi2_sf
from qrwald.qr_solver import fit_rq
from qrwald.schemas import (
    Dataset,
    DGPSpec,
    GEstimate,
    HMatrix,
    QuantileFit,
    Restriction,
    WaldResult,
)
from qrwald.wald import compute_W, pvalue_curve, run_test, wald_test


def _G(matrix, alpha=0.5, method="EG"):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return GEstimate(
        alpha=alpha, method=method, G=matrix, f_hat=np.ones(3), bandwidth=1.0
    )


def _random_spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + d * np.eye(d)


def _scalar_fit(beta, alpha=0.5):
    return QuantileFit(
        alpha=alpha,
        beta=np.array([beta]),
        residuals=np.zeros(3),
        objective=0.0,
        iterations=0,
        converged=True,
    )


def _sample(model=1, a=0.0, n=300, seed=0):
    spec = DGPSpec(model=model, a=a, alpha_star=0.5, n=n)
    return generate_sample(spec, np.random.default_rng(seed))


class TestComputeW:
    def test_scalar(self):
        W = compute_W(_G(2.5), HMatrix(H=np.eye(1)), Restriction(R=[[1.0]], r=[0.0]))
        assert W == pytest.approx(np.array([[6.25]]))

    def test_proportional_to_H(self):
        rng = np.random.default_rng(0)
        H = _random_spd(rng, 4)
        R = rng.standard_normal((2, 4))
        c = 0.7
        W = compute_W(_G(c * H), HMatrix(H=H), Restriction(R=R, r=np.zeros(2)))
        expected = np.linalg.inv(R @ np.linalg.inv(H) @ R.T) * c**2
        assert W == pytest.approx(expected, rel=1e-8)

    def test_matches_explicit_inverse(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            G, H = _random_spd(rng, 5), _random_spd(rng, 5)
            R = rng.standard_normal((3, 5))
            W = compute_W(_G(G), HMatrix(H=H), Restriction(R=R, r=np.zeros(3)))
            Gi = np.linalg.inv(G)
            naive = np.linalg.inv(R @ Gi @ H @ Gi @ R.T)
            assert W == pytest.approx(naive, rel=1e-8, abs=1e-10)
            assert np.array_equal(W, W.T)
            assert np.all(np.linalg.eigvalsh(W) > 0.0)

    def test_singular_G(self):
        G = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularG):
            compute_W(_G(G), HMatrix(H=np.eye(2)), Restriction(R=[[1.0, 0.0]], r=[0.0]))

    def test_singular_core(self):
        with pytest.raises(SingularW):
            compute_W(
                _G(np.eye(2)), HMatrix(H=np.zeros((2, 2))), Restriction(R=[[1.0, 0.0]], r=[0.0])
            )


class TestWaldTest:
    def test_null_exactly_satisfied(self):
        result = wald_test(
            _scalar_fit(0.3), _G(1.0), HMatrix(H=np.eye(1)), Restriction(R=[[1.0]], r=[0.3]), 50
        )
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert not any(result.reject_at.values())

    def test_scalar_hand_algebra(self):
        n, alpha, g, beta, r = 80, 0.25, 0.4, 1.2, 1.0
        result = wald_test(
            _scalar_fit(beta, alpha),
            _G(g, alpha),
            HMatrix(H=np.eye(1)),
            Restriction(R=[[1.0]], r=[r]),
            n,
        )
        expected = n / (alpha * (1 - alpha)) * g**2 * (beta - r) ** 2
        assert result.statistic == pytest.approx(expected)
        assert result.p_value == pytest.approx(chi2_sf(expected, 1))
        assert result.J == 1
        assert result.method == "EG"

    def test_reject_flags_follow_p_value(self):
        result = wald_test(
            _scalar_fit(0.5), _G(1.0), HMatrix(H=np.eye(1)), Restriction(R=[[1.0]], r=[0.0]), 20
        )
        for tau, flag in result.reject_at.items():
            assert flag == (result.p_value < tau)

    def test_level_mismatch(self):
        with pytest.raises(DomainError):
            wald_test(
                _scalar_fit(0.5, 0.5),
                _G(1.0, alpha=0.6),
                HMatrix(H=np.eye(1)),
                Restriction(R=[[1.0]], r=[0.0]),
                20,
            )

    def test_restriction_rescaling_invariance(self):
        data, restr = _sample(a=0.5, seed=1)
        fit = fit_rq(data, 0.5)
        G = _G(weighted_gram(data, np.full(data.n, 0.4)))
        H = compute_H(data)
        R = np.zeros((2, data.d))
        R[0, 5], R[1, 6] = 1.0, 1.0
        r = np.array([0.1, 0.0])
        A = np.array([[2.0, 1.0], [0.5, -3.0]])
        base = wald_test(fit, G, H, Restriction(R=R, r=r), data.n)
        scaled = wald_test(fit, G, H, Restriction(R=A @ R, r=A @ r), data.n)
        assert scaled.statistic == pytest.approx(base.statistic, rel=1e-8)

    def test_reparameterisation_invariance(self):
        data, restr = _sample(a=0.5, seed=2)
        rng = np.random.default_rng(3)
        A = np.eye(data.d) + 0.3 * rng.standard_normal((data.d, data.d))
        moved = Dataset(y=data.y, X=data.X @ A, column_names=data.column_names)
        f_hat = rng.uniform(0.2, 0.6, data.n)

        base = wald_test(
            fit_rq(data, 0.5), _G(weighted_gram(data, f_hat)), compute_H(data), restr, data.n
        )
        other = wald_test(
            fit_rq(moved, 0.5),
            _G(weighted_gram(moved, f_hat)),
            compute_H(moved),
            Restriction(R=restr.R @ A, r=restr.r),
            data.n,
        )
        assert other.statistic == pytest.approx(base.statistic, rel=1e-6)

    def test_p_value_decreasing_in_statistic(self):
        values = [
            wald_test(
                _scalar_fit(b), _G(1.0), HMatrix(H=np.eye(1)), Restriction(R=[[1.0]], r=[0.0]), 30
            ).p_value
            for b in np.linspace(0.0, 1.0, 11)
        ]
        assert all(a > b for a, b in zip(values, values[1:], strict=False))


class TestRunTest:
    @pytest.mark.parametrize("method", ["weg", "wiid", "wnid", "wker"])
    def test_pipeline(self, method):
        data, restr = _sample(seed=4)
        result = run_test(data, restr, 0.5, method)
        assert result.ok
        assert result.statistic >= 0.0
        assert 0.0 <= result.p_value <= 1.0
        assert set(result.reject_at) == {0.01, 0.05, 0.10}

    def test_detects_heterogeneity(self):
        data, restr = _sample(a=1.5, seed=5)
        assert run_test(data, restr, 0.5).p_value < 0.05


class TestPvalueCurve:
    def test_singleton_matches_run_test(self):
        data, restr = _sample(seed=6)
        (point,) = pvalue_curve(data, restr, [0.4])
        assert point.statistic == pytest.approx(run_test(data, restr, 0.4).statistic)

    def test_input_order_and_count(self):
        data, restr = _sample(n=200, seed=7)
        grid = [0.6, 0.3, 0.5]
        results = pvalue_curve(data, restr, grid, "wiid")
        assert [r.alpha for r in results] == grid

    def test_duplicate_points_identical(self):
        data, restr = _sample(n=150, seed=8)
        first, second = pvalue_curve(data, restr, [0.45, 0.45])
        assert first.statistic == second.statistic

    def test_alternative_rejected_at_median(self):
        data, restr = _sample(a=1.5, seed=9)
        results = pvalue_curve(data, restr, np.linspace(0.3, 0.7, 5))
        assert results[2].alpha == pytest.approx(0.5)
        assert results[2].p_value < 0.05

    def test_failure_recorded(self, caplog):
        data, restr = _sample(n=100, seed=10)
        real = run_test

        def flaky(data, restr, alpha, *args, **kwargs):
            if alpha == 0.5:
                raise SingularG("no mass", alpha=alpha)
            return real(data, restr, alpha, *args, **kwargs)

        with (
            patch("qrwald.wald.run_test", side_effect=flaky),
            caplog.at_level(logging.WARNING, logger="qrwald.wald"),
        ):
            results = pvalue_curve(data, restr, [0.4, 0.5, 0.6], "wiid")
        assert [r.ok for r in results] == [True, False, True]
        assert results[1].status == "SingularG"
        assert results[1].statistic is None
        assert results[1].method == "IIDSparsity"
        assert "failed at alpha=0.5000" in caplog.text

    def test_parallel_matches_serial(self):
        data, restr = _sample(n=100, seed=11)
        grid = [0.3, 0.5, 0.7]
        serial = pvalue_curve(data, restr, grid, "wiid")
        parallel = pvalue_curve(data, restr, grid, "wiid", n_jobs=2)
        assert [r.statistic for r in parallel] == pytest.approx([r.statistic for r in serial])

    def test_empty_grid(self):
        data, restr = _sample(n=50)
        with pytest.raises(EmptyGrid):
            pvalue_curve(data, restr, [])

    def test_grid_outside_interval(self):
        data, restr = _sample(n=50)
        with pytest.raises(DomainError):
            pvalue_curve(data, restr, [0.5, 0.995])

    def test_result_model(self):
        data, restr = _sample(n=100, seed=12)
        (result,) = pvalue_curve(data, restr, [0.5], "wker")
        assert isinstance(result, WaldResult)
        assert result.p_value == pytest.approx(chi2_sf(result.statistic, result.J))
