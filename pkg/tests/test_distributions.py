import math

import numpy as np
import pytest
import scipy.integrate as si
import scipy.stats as ss
from hypothesis import given, settings
from hypothesis import strategies as st

from dpk import distributions as D
from dpk.exceptions import ParameterError, SupportError

FAMILIES = ["normal", "skewnormal", "gamma", "poisson", "categorical"]


def random_params(family, rng, n):
    if family == "normal":
        return {"mu": rng.normal(0, 3, n), "sigma": rng.uniform(0.2, 4, n)}
    if family == "skewnormal":
        return {"xi": rng.normal(0, 3, n), "k": rng.uniform(0.2, 4, n), "alpha": rng.uniform(-6, 6, n)}
    if family == "gamma":
        return {"shape": rng.uniform(0.3, 30, n), "scale": rng.uniform(0.1, 5, n)}
    if family == "poisson":
        return {"rate": rng.uniform(0.1, 80, n)}
    u = rng.uniform(0.05, 1, (n, 6))
    return {"p": u / u.sum(axis=1, keepdims=True)}


def make(family):
    return D.get_family(family, n_categories=6) if family == "categorical" else D.get_family(family)


class TestNll:
    def test_normal_values(self):
        assert D.nll("normal", {"mu": 0.0, "sigma": 1.0}, 0.0) == 0.0
        assert D.nll("normal", {"mu": 0.0, "sigma": 2.0}, 2.0) == pytest.approx(0.5 + math.log(2), abs=1e-15)

    def test_gamma_exponential_case(self):
        assert D.nll("gamma", {"shape": 1.0, "scale": 1.0}, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_poisson_zero_count(self):
        assert D.nll("poisson", {"rate": 1.0}, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_categorical_uniform(self):
        fam = D.Categorical(20)
        p = np.full((5, 20), 1 / 20)
        np.testing.assert_allclose(fam.nll({"p": p}, np.arange(5.0)), math.log(20), atol=1e-14)

    def test_matches_scipy_up_to_dropped_constants(self, rng):
        x = rng.normal(size=200)
        p = random_params("normal", rng, 200)
        ref = -ss.norm.logpdf(x, p["mu"], p["sigma"]) - 0.5 * math.log(2 * math.pi)
        np.testing.assert_allclose(D.nll("normal", p, x), ref, atol=1e-12)
        p = random_params("gamma", rng, 200)
        xg = rng.gamma(p["shape"], p["scale"])
        np.testing.assert_allclose(D.nll("gamma", p, xg), -ss.gamma.logpdf(xg, p["shape"], scale=p["scale"]),
                                   rtol=1e-10, atol=1e-10)
        lam = rng.uniform(0.5, 50, 200)
        xp = rng.poisson(lam).astype(float)
        np.testing.assert_allclose(D.nll("poisson", {"rate": lam}, xp), -ss.poisson.logpmf(xp, lam),
                                   rtol=1e-10, atol=1e-10)

    def test_skewnormal_matches_scipy_density(self, rng):
        p = random_params("skewnormal", rng, 300)
        x = p["xi"] + p["k"] * rng.normal(size=300)
        fam = D.SkewNormal(log_cdf="exact")
        # scipy: log(2) + log phi(z) + log Phi(az) - log k
        ref = -ss.skewnorm.logpdf(x, p["alpha"], p["xi"], p["k"]) + math.log(2) - 0.5 * math.log(2 * math.pi)
        np.testing.assert_allclose(fam.nll(p, x), ref, rtol=1e-9, atol=1e-9)

    def test_skewnormal_zero_alpha_is_normal_plus_log2(self, rng):
        x = rng.normal(size=100)
        sn = D.nll("skewnormal", {"xi": 0.3, "k": 1.7, "alpha": 0.0}, x)
        n = D.nll("normal", {"mu": 0.3, "sigma": 1.7}, x)
        np.testing.assert_allclose(sn - n, math.log(2), atol=1e-13)

    def test_support_errors_list_indices(self):
        with pytest.raises(SupportError) as exc:
            D.nll("gamma", {"shape": 2.0, "scale": 1.0}, np.array([1.0, -1.0, 2.0, 0.0]))
        assert list(exc.value.indices) == [1, 3]
        with pytest.raises(SupportError):
            D.nll("poisson", {"rate": 2.0}, np.array([1.5]))
        with pytest.raises(SupportError):
            D.Categorical(3).nll({"p": np.full(3, 1 / 3)}, 3.0)

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            D.nll("normal", {"mu": 5.0, "sigma": 0.0}, 1.0)
        with pytest.raises(ParameterError):
            D.sample("normal", {"mu": 5.0, "sigma": 0.0}, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            D.Categorical(3).nll({"p": np.array([0.5, 0.6, -0.1])}, 0.0)
        with pytest.raises(ValueError):
            D.Categorical(1)


class TestGradients:
    def test_normal_closed_forms(self):
        g = D.nll_grad("normal", {"mu": 1.0, "sigma": 2.0}, 1.0)
        assert g["mu"] == 0.0
        g = D.nll_grad("normal", {"mu": 0.0, "sigma": 1.0}, 2.0)
        assert g["sigma"] == pytest.approx(-3.0, abs=1e-15)

    @pytest.mark.parametrize("family", ["normal", "skewnormal", "gamma", "poisson", "categorical"])
    def test_finite_differences(self, family, rng):
        fam = make(family)
        n = 200
        p = random_params(family, rng, n)
        x = fam.sample(p, rng)
        grads = fam.nll_grad(p, x)
        h = 1e-6
        for name in fam.param_names:
            base = np.asarray(p[name], dtype=float)
            cols = [None] if base.ndim == 1 else range(base.shape[1])
            for j in cols:
                up, dn = {**p}, {**p}
                bump = np.zeros_like(base)
                if j is None:
                    bump[:] = h * np.maximum(1.0, np.abs(base))
                else:
                    bump[:, j] = h
                up[name], dn[name] = base + bump, base - bump
                if family == "categorical":
                    # gradient w.r.t. p_j holding the other entries fixed (off the simplex)
                    fd = (-np.log(np.take_along_axis(up["p"], x.astype(int)[:, None], 1)[:, 0])
                          + np.log(np.take_along_axis(dn["p"], x.astype(int)[:, None], 1)[:, 0])) / (2 * h)
                    an = grads[name][:, j]
                else:
                    step = bump
                    fd = (fam.nll(up, x) - fam.nll(dn, x)) / (2 * step)
                    an = grads[name]
                np.testing.assert_allclose(an, fd, rtol=1e-4, atol=1e-6)

    def test_skewnormal_approx_gradient_is_consistent(self, rng):
        fam = D.SkewNormal(log_cdf="approx")
        p = random_params("skewnormal", rng, 100)
        x = p["xi"] + p["k"] * rng.normal(size=100)
        # keep every alpha * z away from the branch point at -0.1
        w = p["alpha"] * (x - p["xi"]) / p["k"]
        keep = np.abs(w + 0.1) > 1e-2
        p = {k: v[keep] for k, v in p.items()}
        x = x[keep]
        g = fam.nll_grad(p, x)
        h = 1e-7
        up = {**p, "alpha": p["alpha"] + h}
        dn = {**p, "alpha": p["alpha"] - h}
        np.testing.assert_allclose(g["alpha"], (fam.nll(up, x) - fam.nll(dn, x)) / (2 * h), rtol=1e-4, atol=1e-6)


class TestLogCdfPolicy:
    def test_auto_switches_whole_batch_on_underflow(self):
        fam = D.SkewNormal("auto")
        p = {"xi": np.zeros(2), "k": np.ones(2), "alpha": np.array([1.0, 50.0])}
        x = np.array([0.5, -2.0])  # w = 0.5 and -100
        v = fam.nll(p, x)
        assert np.all(np.isfinite(v))
        approx = D.SkewNormal("approx").nll(p, x)
        np.testing.assert_array_equal(v, approx)

    def test_auto_uses_exact_when_safe(self):
        p = {"xi": 0.0, "k": 1.0, "alpha": 2.0}
        assert D.SkewNormal("auto").nll(p, 0.3) == D.SkewNormal("exact").nll(p, 0.3)

    def test_exact_mode_overflows_to_inf(self):
        p = {"xi": 0.0, "k": 1.0, "alpha": 50.0}
        with np.errstate(all="ignore"):
            assert np.isinf(D.SkewNormal("exact").nll(p, -2.0))


class TestCdf:
    def test_anchor_values(self):
        assert D.cdf("normal", {"mu": 0.0, "sigma": 1.0}, 0.0) == 0.5
        assert D.cdf("gamma", {"shape": 1.0, "scale": 1.0}, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
        v = D.cdf("skewnormal", {"xi": 0.0, "k": 1.0, "alpha": 3.0}, 0.0)
        assert v == pytest.approx(0.5 - math.atan(3) / math.pi, abs=1e-14)
        assert v == pytest.approx(0.10242, abs=1e-5)

    def test_skewnormal_zero_alpha_is_normal(self):
        x = np.linspace(-10, 10, 301)
        a = D.cdf("skewnormal", {"xi": 1.0, "k": 2.0, "alpha": 0.0}, x)
        b = D.cdf("normal", {"mu": 1.0, "sigma": 2.0}, x)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_skewnormal_against_density_quadrature(self, rng):
        for _ in range(20):
            xi, k, a = rng.normal(), rng.uniform(0.3, 3), rng.uniform(-8, 8)
            x = xi + k * rng.uniform(-3, 3)

            def pdf(u):
                z = (u - xi) / k
                return 2 / k * ss.norm.pdf(z) * ss.norm.cdf(a * z)

            ref = si.quad(pdf, -np.inf, x, epsabs=1e-13, epsrel=1e-12)[0]
            assert D.cdf("skewnormal", {"xi": xi, "k": k, "alpha": a}, x) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_monotone(self, family, rng):
        fam = make(family)
        p = random_params(family, rng, 1)
        p = {k: v[0] for k, v in p.items()}
        lo, hi = fam.moments_bracket(p, 6.0)
        grid = np.linspace(float(lo), float(hi), 500)
        c = fam.cdf({k: np.broadcast_to(v, (500,) + np.shape(v)) for k, v in p.items()}, grid)
        assert np.all(np.diff(c) >= 0)

    def test_matches_scipy(self, rng):
        p = random_params("gamma", rng, 100)
        x = rng.uniform(0.01, 60, 100)
        np.testing.assert_allclose(D.cdf("gamma", p, x), ss.gamma.cdf(x, p["shape"], scale=p["scale"]), atol=1e-12)
        lam = rng.uniform(0.1, 50, 100)
        k = np.floor(rng.uniform(0, 60, 100))
        np.testing.assert_allclose(D.cdf("poisson", {"rate": lam}, k), ss.poisson.cdf(k, lam), atol=1e-12)


class TestQuantile:
    def test_anchors(self):
        assert D.quantile("normal", {"mu": 0.0, "sigma": 1.0}, 0.5) == pytest.approx(0.0, abs=1e-15)
        v = D.quantile("skewnormal", {"xi": 2.0, "k": 3.0, "alpha": 0.0}, 0.9)
        assert v == pytest.approx(2 + 3 * 1.2815515655446004, abs=1e-6)

    @pytest.mark.parametrize("family", ["normal", "skewnormal", "gamma"])
    def test_continuous_round_trip(self, family, rng):
        fam = make(family)
        p = random_params(family, rng, 100)
        for q in (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
            np.testing.assert_allclose(fam.cdf(p, fam.quantile(p, q)), q, atol=1e-8)

    @pytest.mark.parametrize("family", ["poisson", "categorical"])
    def test_discrete_generalized_inverse(self, family, rng):
        fam = make(family)
        p = random_params(family, rng, 100)
        for q in (0.01, 0.1, 0.5, 0.9, 0.99):
            k = fam.quantile(p, q)
            assert np.all(fam.cdf(p, k) >= q - 1e-8)
            assert np.all(fam.cdf(p, k - 1) < q)

    def test_categorical_example(self):
        fam = D.Categorical(4)
        p = {"p": np.array([0.1, 0.2, 0.3, 0.4])}
        assert [float(fam.quantile(p, q)) for q in (0.05, 0.1, 0.25, 0.65, 0.99)] == [0, 0, 1, 3, 3]

    def test_bad_level(self):
        with pytest.raises(ValueError):
            D.quantile("normal", {"mu": 0.0, "sigma": 1.0}, 1.0)


class TestMoments:
    def test_closed_forms(self):
        assert D.mean("skewnormal", {"xi": 1.5, "k": 2.0, "alpha": 0.0}) == 1.5
        assert D.mean("gamma", {"shape": 8.0, "scale": 3.0}) == 24.0
        assert D.mean("poisson", {"rate": 3.5}) == 3.5
        assert D.Categorical(3).mean({"p": np.array([0.2, 0.3, 0.5])}) == pytest.approx(1.3)

    def test_skewnormal_moments_match_scipy(self, rng):
        p = random_params("skewnormal", rng, 50)
        m, v = ss.skewnorm.stats(p["alpha"], p["xi"], p["k"], moments="mv")
        np.testing.assert_allclose(D.mean("skewnormal", p), m, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(D.std("skewnormal", p), np.sqrt(v), rtol=1e-12)


class TestSampling:
    N = 1_000_000

    @pytest.mark.parametrize("family,params", [
        ("normal", {"mu": 5.0, "sigma": 2.0}),
        ("skewnormal", {"xi": 1.0, "k": 2.0, "alpha": 4.0}),
        ("gamma", {"shape": 8.0, "scale": 3.0}),
        ("gamma", {"shape": 0.4, "scale": 2.0}),
        ("poisson", {"rate": 3.0}),
        ("poisson", {"rate": 250.0}),
    ])
    def test_mean_within_four_standard_errors(self, family, params):
        fam = make(family)
        x = fam.sample(params, np.random.default_rng(7), size=self.N)
        se = float(fam.std(params)) / math.sqrt(self.N)
        assert abs(x.mean() - float(fam.mean(params))) < 4 * se
        assert x.var() == pytest.approx(float(fam.std(params)) ** 2, rel=0.01)

    def test_gamma_variance(self):
        x = D.sample("gamma", {"shape": 8.0, "scale": 3.0}, np.random.default_rng(1), size=self.N)
        assert abs(x.mean() - 24) < 4 * math.sqrt(72 / self.N)
        assert x.var() == pytest.approx(72, rel=0.05)

    @pytest.mark.parametrize("family,params,dist", [
        ("normal", {"mu": 1.0, "sigma": 0.5}, ss.norm(1.0, 0.5)),
        ("skewnormal", {"xi": -1.0, "k": 1.5, "alpha": -3.0}, ss.skewnorm(-3.0, -1.0, 1.5)),
        ("gamma", {"shape": 2.5, "scale": 1.5}, ss.gamma(2.5, scale=1.5)),
        ("gamma", {"shape": 0.5, "scale": 1.0}, ss.gamma(0.5)),
    ])
    def test_ks(self, family, params, dist):
        x = D.sample(family, params, np.random.default_rng(3), size=100_000)
        assert ss.kstest(x, dist.cdf).statistic < 0.01

    @pytest.mark.parametrize("rate", [0.7, 12.0, 29.9, 30.0, 45.0, 400.0])
    def test_poisson_chi_square(self, rate):
        x = D.sample("poisson", {"rate": rate}, np.random.default_rng(11), size=200_000).astype(int)
        m = int(ss.poisson.ppf(1 - 1e-5, rate))
        obs = np.bincount(np.minimum(x, m), minlength=m + 1)
        probs = np.append(ss.poisson.pmf(np.arange(m), rate), ss.poisson.sf(m - 1, rate))
        keep = probs * x.size > 5
        exp = probs[keep] * x.size
        pval = ss.chisquare(obs[keep], exp * obs[keep].sum() / exp.sum()).pvalue
        assert pval > 0.001

    def test_categorical_frequencies(self):
        p = np.array([0.05, 0.25, 0.1, 0.6])
        x = D.Categorical(4).sample({"p": p}, np.random.default_rng(2), size=400_000)
        counts = np.bincount(x.astype(int), minlength=4)
        assert ss.chisquare(counts, p * x.size).pvalue > 0.01

    def test_degenerate_categorical(self):
        p = np.zeros(5)
        p[0] = 1.0
        x = D.Categorical(5).sample({"p": p}, np.random.default_rng(0), size=10_000)
        assert np.all(x == 0)

    def test_skewnormal_zero_alpha_matches_normal(self):
        x = D.sample("skewnormal", {"xi": 0.0, "k": 1.0, "alpha": 0.0}, np.random.default_rng(5), size=100_000)
        assert ss.kstest(x, "norm").statistic < 0.01

    @pytest.mark.parametrize("family", FAMILIES)
    def test_deterministic_given_seed(self, family, rng):
        fam = make(family)
        p = random_params(family, rng, 50)
        a = fam.sample(p, np.random.default_rng(9))
        b = fam.sample(p, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)


class TestLinks:
    @settings(max_examples=50)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
    def test_softplus_positive(self, raw):
        out = D.Normal().link([np.zeros(len(raw)), np.array(raw)])["sigma"]
        assert np.all(out > 0)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-200, 200), min_size=3, max_size=3))
    def test_softmax_simplex(self, raw):
        p = D.Categorical(3).link([np.array([raw])])["p"]
        assert np.all(p >= 0)
        assert abs(p.sum() - 1) < 1e-12

    def test_zero_raw_outputs(self):
        params = D.Normal().link([np.zeros(3), np.zeros(3)])
        np.testing.assert_array_equal(params["mu"], 0.0)
        np.testing.assert_allclose(params["sigma"], math.log(2), atol=1e-15)


def test_denormalize_round_trip_matches_affine_map(rng):
    p = {"mu": rng.normal(size=10), "sigma": rng.uniform(0.5, 2, 10)}
    q = D.Normal().denormalize(p, 3.0, 2.5)
    z = rng.normal(size=10)
    np.testing.assert_allclose(D.cdf("normal", q, 3.0 + 2.5 * z), D.cdf("normal", p, z), atol=1e-12)
    s = {"xi": rng.normal(size=10), "k": rng.uniform(0.5, 2, 10), "alpha": rng.normal(size=10)}
    t = D.SkewNormal().denormalize(s, -1.0, 4.0)
    np.testing.assert_allclose(D.cdf("skewnormal", t, -1.0 + 4.0 * z), D.cdf("skewnormal", s, z), atol=1e-12)


def test_family_round_trip_through_dict():
    for fam in (D.Normal(), D.SkewNormal("approx"), D.Gamma(), D.Poisson(), D.Categorical(7)):
        assert D.get_family(fam.to_dict()) == fam
    with pytest.raises(ValueError):
        D.get_family("cauchy")
