import math

import numpy as np
import pytest

from qrwald.dgp import COLUMNS, TESTED, delta_a, error_quantile, generate_sample, true_beta
from qrwald.errors import DomainError
from qrwald.numerics import beta_quantile, normal_quantile
from qrwald.schemas import DGPSpec


class TestDeltaA:
    def test_model1_constant(self):
        assert delta_a(1, 0.7, 0.123) == 0.7
        assert delta_a(1, 0.7, np.array([0.1, 0.9])) == pytest.approx([0.7, 0.7])

    def test_model2(self):
        assert delta_a(2, 0.5, 0.975) == pytest.approx(0.5 * (1.0 + normal_quantile(0.975)))

    def test_model3_zero_at_reference_level(self):
        assert delta_a(3, 0.0, 0.3, alpha_star=0.3) == pytest.approx(0.0, abs=1e-12)
        expected = beta_quantile(0.6, 1, 4) - beta_quantile(0.3, 1, 4)
        assert delta_a(3, 0.0, 0.6, alpha_star=0.3) == pytest.approx(expected)

    def test_model4_arcsine(self):
        assert delta_a(4, 0.5, 0.25) == pytest.approx(0.1464466, abs=1e-7)

    def test_model5(self):
        assert delta_a(5, 1.0, 0.5) == pytest.approx(1.0)

    def test_model6_cancels(self):
        assert delta_a(6, 0.0, 0.35, alpha_star=0.35) == pytest.approx(0.0, abs=1e-15)
        assert delta_a(6, 1.0, 0.35, alpha_star=0.35) == pytest.approx(-1.0)

    def test_unknown_model(self):
        with pytest.raises(DomainError):
            delta_a(7, 0.0, 0.5)

    def test_level_domain(self):
        with pytest.raises(DomainError):
            delta_a(1, 0.0, 1.0)


class TestErrorQuantile:
    def test_normal(self):
        assert error_quantile(0.5) == pytest.approx(0.0)

    def test_t3(self):
        assert error_quantile(np.array([0.975]), "t3") == pytest.approx([3.182446], abs=1e-5)

    def test_unknown(self):
        with pytest.raises(DomainError):
            error_quantile(0.5, "cauchy")


class TestGenerateSample:
    def test_layout(self):
        data, restr = generate_sample(DGPSpec(model=1, n=50), np.random.default_rng(0))
        assert data.column_names == COLUMNS
        assert data.d == 7
        assert np.all(data.X[:, 0] == 1.0)
        assert np.array_equal(data.X[:, 6], data.X[:, 5] * data.X[:, 1])
        assert restr.J == 1
        assert restr.R[0, COLUMNS.index(TESTED)] == 1.0
        assert restr.r == pytest.approx([0.0])

    def test_moments(self):
        n = 2000
        data, _ = generate_sample(DGPSpec(model=2, a=1.0, n=n), np.random.default_rng(1))
        assert np.all(np.abs(data.X[:, 1:5].mean(axis=0)) <= 4.0 / math.sqrt(n))
        assert abs(data.X[:, 5].mean() - 0.5) <= 3.0 / (2.0 * math.sqrt(n))

    def test_reproducible(self):
        spec = DGPSpec(model=4, a=0.5, n=40)
        first, _ = generate_sample(spec, np.random.default_rng(3))
        second, _ = generate_sample(spec, np.random.default_rng(3))
        assert np.array_equal(first.y, second.y)

    def test_null_location_quantile_is_linear(self):
        # a = 0 in a pure-location design: y - (1 + x1 + .. + d) is the error alone
        data, _ = generate_sample(DGPSpec(model=5, a=0.0, n=5000), np.random.default_rng(4))
        noise = data.y - data.X[:, :6].sum(axis=1)
        assert np.quantile(noise, 0.5) == pytest.approx(0.0, abs=0.06)

    def test_t3_errors(self):
        data, _ = generate_sample(DGPSpec(model=1, F="t3", n=100), np.random.default_rng(5))
        assert np.all(np.isfinite(data.y))

    @pytest.mark.parametrize("model", [1, 2, 3])
    def test_t3_errors_many_draws(self, model):
        # uniforms landing near 1/2 and deep in the tails both go through the t3 inverse
        for seed in range(10):
            spec = DGPSpec(model=model, a=1.0, F="t3", n=1000)
            data, _ = generate_sample(spec, np.random.default_rng(seed))
            assert np.all(np.isfinite(data.y))
        u = np.array([1e-6, 0.2499, 0.25, 0.49999, 0.5, 0.50001, 0.75, 0.999999])
        q = error_quantile(u, "t3")
        assert np.all(np.diff(q) > 0.0)
        assert q[4] == pytest.approx(0.0, abs=1e-12)


class TestTrueBeta:
    def test_model1(self):
        beta = true_beta(DGPSpec(model=1, a=0.5, n=50))(0.5)
        assert beta == pytest.approx([1.0, 1, 1, 1, 1, 1, 0.5])

    def test_tested_coefficient_zero_under_null(self):
        for model in range(1, 7):
            spec = DGPSpec(model=model, a=0.0, alpha_star=0.4, n=50)
            assert true_beta(spec)(0.4)[-1] == pytest.approx(0.0, abs=1e-12)

    def test_intercept_tracks_error_quantile(self):
        beta = true_beta(DGPSpec(model=1, n=50))(0.9)
        assert beta[0] == pytest.approx(1.0 + normal_quantile(0.9))
