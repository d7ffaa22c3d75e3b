import math
import warnings

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given, settings
from hypothesis import strategies as st

from dpk import evaluation as E
from dpk.distributions import SkewNormal


class TestPinball:
    def test_zero_at_observation(self):
        assert E.pinball(3.0, 50, 3.0) == 0.0

    def test_branches(self):
        assert E.pinball(12.0, 90, 10.0) == pytest.approx(0.2, abs=1e-15)
        assert E.pinball(5.0, 10, 10.0) == pytest.approx(0.5, abs=1e-15)

    def test_level_range(self):
        with pytest.raises(ValueError):
            E.pinball(1.0, 100, 0.0)

    def test_aggregate_equals_loop(self, rng):
        n = 200
        levels = tuple(range(10, 100, 10))
        base = rng.normal(size=(n, 1))
        values = np.sort(base + rng.normal(size=(n, 9)), axis=1)
        table = E.QuantileForecastTable(np.arange(n), levels, values)
        x = rng.normal(size=n)
        assert E.pinball_score(table, x) == E.pinball_score_loop(table, x)

    def test_minimized_at_true_quantile(self):
        x = np.random.default_rng(0).normal(size=100_000)
        grid = np.linspace(1.0, 1.6, 601)
        losses = [np.mean(E.pinball(c, 90, x)) for c in grid]
        assert abs(grid[int(np.argmin(losses))] - 1.2816) <= 0.05

    def test_table_requires_monotone_values(self):
        with pytest.raises(ValueError):
            E.QuantileForecastTable([0.0], (10, 90), [[2.0, 1.0]])

    def test_three_row_fixture(self):
        table = E.QuantileForecastTable([0, 1, 2], (10, 50, 90), [[1, 2, 3], [0, 1, 2], [4, 5, 6]])
        x = np.array([2.5, 0.0, 7.0])
        terms = [0.1 * 1.5, 0.5 * 0.5, 0.1 * 0.5,
                 0.9 * 0.0, 0.5 * 1.0, 0.1 * 2.0,
                 0.1 * 3.0, 0.5 * 2.0, 0.9 * 1.0]
        assert E.pinball_score(table, x) == pytest.approx(sum(terms) / 9, abs=1e-12)


class TestRelativeScore:
    def test_values(self):
        assert E.relative_score(3.0, 3.0) == 0.0
        assert E.relative_score(0.846, 1.0) == pytest.approx(15.4, abs=1e-9)
        assert E.relative_score(2.0, 1.0) == -100.0

    @settings(max_examples=100)
    @given(st.floats(0, 1e6), st.floats(1e-6, 1e6))
    def test_formula(self, a, b):
        assert E.relative_score(a, b) == pytest.approx(100 - 100 * (a / b), rel=1e-12, abs=1e-9)
        assert E.relative_score(b, b) == 0.0

    def test_zero_baseline(self):
        with pytest.raises(ValueError, match="zero baseline"):
            E.relative_score(1.0, 0.0)


class TestResiduals:
    def test_bias_at_means(self, rng):
        n = 100_000
        params = {"mu": rng.normal(size=n), "sigma": rng.uniform(0.5, 2, n)}
        x = rng.normal(params["mu"], params["sigma"])
        rep = E.standardized_residuals(x, params, "normal")
        assert abs(rep.mean_bias) < 4 / math.sqrt(n)
        assert rep.rms == pytest.approx(1.0, rel=0.02)

    def test_offset_shifts_bias(self, rng):
        params = {"mu": rng.normal(size=50), "sigma": rng.uniform(0.5, 2, 50)}
        x = rng.normal(size=50)
        a = E.standardized_residuals(x, params, "normal").mean_bias
        b = E.standardized_residuals(x + 0.7 * params["sigma"], params, "normal").mean_bias
        assert b - a == pytest.approx(0.7, abs=1e-12)

    def test_skewnormal_uses_distribution_moments(self, rng):
        params = {"xi": np.zeros(200_000), "k": np.full(200_000, 2.0), "alpha": np.full(200_000, 5.0)}
        x = SkewNormal().sample(params, rng)
        rep = E.standardized_residuals(x, params, "skewnormal")
        assert abs(rep.mean_bias) < 0.01
        assert rep.rms == pytest.approx(1.0, abs=0.01)

    def test_discrete_rejected(self):
        with pytest.raises(ValueError):
            E.standardized_residuals([1.0], {"rate": 1.0}, "poisson")


class TestDeskew:
    def test_median_maps_to_zero(self):
        assert E.deskew(1.3, {"xi": 1.3, "k": 2.0, "alpha": 0.0}) == pytest.approx(0.0, abs=1e-15)

    def test_standard_normal_output(self, rng):
        n = 100_000
        params = {"xi": rng.normal(size=n), "k": rng.uniform(0.5, 3, n), "alpha": rng.uniform(-5, 5, n)}
        x = SkewNormal().sample(params, rng)
        z = E.deskew(x, params)
        assert ss.kstest(z, "norm").statistic < 0.01

    def test_monotone(self):
        p = {"xi": 0.5, "k": 1.5, "alpha": 3.0}
        x = np.linspace(-5, 10, 500)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            z = E.deskew(x, {k: np.full(500, v) for k, v in p.items()})
        assert np.all(np.diff(z) >= 0)

    def test_clamps_with_warning(self):
        p = {"xi": np.zeros(3), "k": np.ones(3), "alpha": np.zeros(3)}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            z = E.deskew(np.array([-50.0, 0.0, 50.0]), p)
        assert z[0] == -8.0 and z[2] == 8.0 and z[1] == 0.0
        assert any("clamped 2" in str(w.message) for w in caught)


class TestSkillScores:
    def test_perfect(self, rng):
        x = rng.uniform(1, 5, 100)
        nmb, nrmse, r = E.skill_scores(x, x)
        assert nmb == 0 and nrmse == 0 and r == pytest.approx(1.0, abs=1e-12)

    def test_scaled_forecast_bias(self, rng):
        x = rng.uniform(1, 5, 100)
        assert E.skill_scores(1.1 * x, x).nmb == pytest.approx(0.1, abs=1e-14)

    def test_anticorrelated(self, rng):
        x = rng.normal(size=100)
        x -= x.mean()
        assert E.skill_scores(-x, x).pearson == pytest.approx(-1.0, abs=1e-12)

    def test_nrmse_uses_linear_quantiles(self):
        x = np.arange(1.0, 21.0)
        f = x + 2.0
        spread = np.quantile(x, 0.95) - np.quantile(x, 0.05)
        assert spread == pytest.approx(17.1)
        assert E.skill_scores(f, x).nrmse == pytest.approx(2.0 / 17.1, rel=1e-14)

    def test_degenerate(self):
        with pytest.raises(ValueError):
            E.skill_scores(np.ones(5), np.ones(5))
        with pytest.raises(ValueError):
            E.skill_scores(np.array([1.0, -1.0]), np.array([1.0, -1.0]))
