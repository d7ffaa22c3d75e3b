import math

import numpy as np
import pytest

from dpk import net, synth
from dpk.distributions import Categorical, Gamma, Normal
from dpk.exceptions import DivergenceError, ParameterError
from dpk.model import DPKForecaster
from dpk.series import FrequencySpec


class TestGaussian:
    def test_initial_values(self):
        _, truth = synth.gen_gaussian(1)
        assert truth["mu"][0] == pytest.approx(2 * math.sin(1), abs=1e-15)
        assert truth["mu"][0] == pytest.approx(1.68294, abs=1e-5)
        assert truth["sigma"][0] == pytest.approx(math.exp(-1) + 0.5, abs=1e-15)

    def test_bounds_and_periods(self):
        t = np.linspace(0, 5000, 100_001)
        assert np.all(synth.gaussian_sigma(t) >= 0.5 + math.exp(-2) - 1e-15)
        ti = np.arange(2000.0)
        np.testing.assert_allclose(synth.gaussian_mu(ti), synth.gaussian_mu(ti + 48), atol=1e-12)
        np.testing.assert_allclose(synth.gaussian_sigma(ti), synth.gaussian_sigma(ti + 31), atol=1e-12)

    def test_reproducible(self):
        a, _ = synth.gen_gaussian(500, seed=7)
        b, _ = synth.gen_gaussian(500, seed=7)
        c, _ = synth.gen_gaussian(500, seed=8)
        np.testing.assert_array_equal(a.x, b.x)
        assert not np.array_equal(a.x, c.x)

    def test_shape(self):
        s, truth = synth.gen_gaussian(20_000, seed=7)
        assert len(s) == 20_000
        np.testing.assert_array_equal(s.times, np.arange(20_000.0))
        Normal().validate(truth)


class TestGamma:
    def test_initial_values(self):
        _, truth = synth.gen_gamma(1)
        assert truth["shape"][0] == pytest.approx(8.0, abs=1e-14)
        assert truth["scale"][0] == pytest.approx(3.0, abs=1e-14)

    def test_bounds(self):
        t = np.linspace(0, 2000, 200_001)
        assert np.all(synth.gamma_shape(t) >= 4.0)
        b = synth.gamma_scale(t)
        assert b.min() >= 0.5 and b.max() <= 3.5

    def test_samples_positive_and_valid(self):
        s, truth = synth.gen_gamma(5000, seed=2)
        assert np.all(s.x > 0)
        Gamma().validate(truth)


def test_generator_rejects_invalid_parameter_functions():
    spec = synth.GeneratorSpec(Normal(), {"mu": lambda t: 0 * t, "sigma": lambda t: np.sin(t)}, 10)
    with pytest.raises(ParameterError):
        synth.generate(spec)


class TestDuffing:
    def test_unforced_settles_in_well(self):
        cfg = synth.DuffingConfig(gamma=0.0, delta=0.3, x0=0.1, v0=0.0, dt=0.01, n_steps=20_001)
        t, x, _ = synth.duffing_trajectory(cfg)
        assert t[-1] == pytest.approx(200.0)
        assert abs(x[-1] - 1.0) < 0.01

    def test_rk4_fourth_order(self):
        # max error over the shared grid; a single chaotic endpoint can cancel by chance
        def path(dt):
            return synth.duffing_trajectory(synth.DuffingConfig(dt=dt, n_steps=int(round(50 / dt)) + 1))[1]

        ref = path(0.1 / 16)[::16]
        e1 = np.max(np.abs(path(0.1) - ref))
        e2 = np.max(np.abs(path(0.05)[::2] - ref))
        assert 8 <= e1 / e2 <= 32

    def test_bins_cover_extremes(self):
        _, binned, edges = synth.duffing_series(synth.DuffingConfig(n_steps=5000))
        cont, _, _ = synth.duffing_series(synth.DuffingConfig(n_steps=5000))
        i_max, i_min = np.argmax(cont.x), np.argmin(cont.x)
        assert binned.x[i_max] == 19 and binned.x[i_min] == 0
        assert cont.x.min() == edges[0] and cont.x.max() == edges[-1]
        np.testing.assert_array_equal(binned.times, np.arange(5000.0))

    def test_assign_bins_rule(self):
        edges = np.linspace(0.0, 10.0, 6)
        np.testing.assert_array_equal(synth.assign_bins([0.0, 1.99, 2.0, 9.99, 10.0, -1, 11], edges),
                                      [0, 0, 1, 4, 4, 0, 4])

    def test_all_bins_occupied(self):
        _, binned, _ = synth.duffing_series(synth.DuffingConfig())
        counts = np.bincount(binned.x.astype(int), minlength=20)
        assert counts.size == 20 and np.all(counts > 0)

    def test_divergence_reports_step(self):
        cfg = synth.DuffingConfig(alpha=0.0, beta=-1.0, x0=10.0, dt=0.5, n_steps=1000)
        with pytest.raises(DivergenceError, match="step"):
            synth.duffing_trajectory(cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            synth.DuffingConfig(dt=0.0)
        with pytest.raises(ValueError):
            synth.DuffingConfig(n_bins=1)

    def test_forcing_frequency_per_sample(self):
        assert synth.DuffingConfig().omega_per_sample == pytest.approx(0.07)


class TestFromModel:
    def test_deterministic(self):
        m = DPKForecaster.from_heads(Normal(), FrequencySpec((0.2,)),
                                     [net.MlpParams([np.array([[1.0, 0.0]])], [np.zeros(1)]),
                                      net.MlpParams([np.zeros((1, 2))], [np.zeros(1)])])
        t = np.arange(100.0)
        np.testing.assert_array_equal(synth.gen_from_model(m, t, 3).x, synth.gen_from_model(m, t, 3).x)

    def test_one_hot_categorical_constant(self):
        head = net.MlpParams([np.zeros((4, 2))], [np.array([0.0, 800.0, 0.0, 0.0])])
        m = DPKForecaster.from_heads(Categorical(4), FrequencySpec((0.2,)), [head])
        s = synth.gen_from_model(m, np.arange(1000.0), 0)
        assert np.all(s.x == 1)

    def test_normal_sample_mean(self):
        sigma_raw = math.log(math.expm1(1.5))
        m = DPKForecaster.from_heads(Normal(), FrequencySpec((0.2,)),
                                     [net.MlpParams([np.array([[0.7, 0.0]])], [np.array([2.0])]),
                                      net.MlpParams([np.zeros((1, 2))], [np.array([sigma_raw])])])
        s = synth.gen_from_model(m, np.arange(100_000) * (2 * math.pi / 0.2), 5)
        mu = 2.0 + 0.7
        assert abs(s.x.mean() - mu) < 4 * 1.5 / math.sqrt(s.x.size)
