"""Synthetic data: time-varying Gaussian and gamma processes, the forced
Duffing oscillator with categorical binning, and samples from a model."""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Gamma, Normal, get_family
from .exceptions import DivergenceError, ParameterError
from .series import TimeSeries

__all__ = [
    "GeneratorSpec",
    "generate",
    "gaussian_mu",
    "gaussian_sigma",
    "gamma_shape",
    "gamma_scale",
    "gen_gaussian",
    "gen_gamma",
    "DuffingConfig",
    "duffing_trajectory",
    "bin_edges",
    "assign_bins",
    "duffing_series",
    "gen_from_model",
    "GENERATORS",
]

TWO_PI = 2.0 * math.pi


def gaussian_mu(t):
    return 2.0 * np.sin(1.0 + np.sin(TWO_PI * np.asarray(t, dtype=float) / 48.0))


def gaussian_sigma(t):
    return np.exp(np.sin(TWO_PI * np.asarray(t, dtype=float) / 31.0) - 1.0) + 0.5


def gamma_shape(t):
    t = np.asarray(t, dtype=float)
    return (np.exp(np.sin(TWO_PI * t / 96.0)) + np.cos(TWO_PI * t / 12.0)) ** 2 + 4.0


def gamma_scale(t):
    t = np.asarray(t, dtype=float)
    return np.sin(TWO_PI * t / 12.0) / 2.0 + np.cos(TWO_PI * t / 96.0) + 2.0


@dataclass(frozen=True)
class GeneratorSpec:
    """A family plus closed-form parameter functions of time."""

    family: object
    param_fns: dict
    n_steps: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")


def generate(spec, check_density=10):
    """Sample ``x_t`` at ``t = 0..n_steps-1``; returns ``(series, truth)``.

    Parameter functions are checked against the family constraints on a grid
    ``check_density`` times finer than the emitted one before sampling.
    """
    family = get_family(spec.family)
    n = int(spec.n_steps)
    grid = np.linspace(0.0, n - 1.0, (n - 1) * check_density + 1) if n > 1 else np.zeros(1)
    try:
        family.validate({k: fn(grid) for k, fn in spec.param_fns.items()})
    except ParameterError as exc:
        raise ParameterError(f"generator parameters violate the family constraints: {exc}") from None
    t = np.arange(n, dtype=float)
    truth = {k: np.asarray(fn(t), dtype=float) for k, fn in spec.param_fns.items()}
    rng = np.random.default_rng(spec.seed)
    x = family.sample(truth, rng)
    return TimeSeries(t, x), truth


def gen_gaussian(n_steps, seed=0):
    return generate(GeneratorSpec(Normal(), {"mu": gaussian_mu, "sigma": gaussian_sigma}, n_steps, seed))


def gen_gamma(n_steps, seed=0):
    return generate(GeneratorSpec(Gamma(), {"shape": gamma_shape, "scale": gamma_scale}, n_steps, seed))


@dataclass(frozen=True)
class DuffingConfig:
    """``x'' + delta x' + alpha x + beta x^3 = gamma cos(omega t)``; chaotic defaults."""

    delta: float = 0.1
    alpha: float = -1.0
    beta: float = 1.0
    gamma: float = 0.375
    omega: float = 1.4
    x0: float = 1.0
    v0: float = 0.0
    dt: float = 0.05
    n_steps: int = 100_000
    n_bins: int = 20

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_bins) < 2:
            raise ValueError("n_bins must be >= 2")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def omega_per_sample(self):
        """Forcing frequency in radians per recorded sample."""
        return self.omega * self.dt


def duffing_trajectory(cfg):
    """Classic RK4 on the first-order system; returns ``(t, x, v)`` per step."""
    n = int(cfg.n_steps)
    delta, alpha, beta, gamma, omega, dt = cfg.delta, cfg.alpha, cfg.beta, cfg.gamma, cfg.omega, cfg.dt
    cos = math.cos

    def acc(t, x, v):
        return -delta * v - alpha * x - beta * x * x * x + gamma * cos(omega * t)

    xs = np.empty(n)
    vs = np.empty(n)
    x, v = float(cfg.x0), float(cfg.v0)
    half = 0.5 * dt
    for i in range(n):
        xs[i], vs[i] = x, v
        t = i * dt
        k1x, k1v = v, acc(t, x, v)
        k2x, k2v = v + half * k1v, acc(t + half, x + half * k1x, v + half * k1v)
        k3x, k3v = v + half * k2v, acc(t + half, x + half * k2x, v + half * k2v)
        k4x, k4v = v + dt * k3v, acc(t + dt, x + dt * k3x, v + dt * k3v)
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (math.isfinite(x) and math.isfinite(v)):
            raise DivergenceError(f"duffing integration became non-finite at step {i + 1}")
    return np.arange(n) * dt, xs, vs


def bin_edges(x, n_bins):
    """``n_bins`` equal-width bins spanning ``[min x, max x]``."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise ValueError("cannot bin a constant trajectory")
    return np.linspace(lo, hi, int(n_bins) + 1)


def assign_bins(x, edges):
    """Bin index ``clamp(floor((x - min) / width), 0, n_bins - 1)``."""
    edges = np.asarray(edges, dtype=float)
    n_bins = edges.size - 1
    width = (edges[-1] - edges[0]) / n_bins
    idx = np.floor((np.asarray(x, dtype=float) - edges[0]) / width)
    return np.clip(idx, 0, n_bins - 1).astype(int)


def duffing_series(cfg=None):
    """Integrate and bin the oscillator.

    Returns ``(continuous, binned, edges)``. ``continuous`` is indexed by
    physical time ``i * dt``; ``binned`` by sample index ``i``, so its forcing
    frequency is ``cfg.omega_per_sample``. Edges span the whole trajectory.
    """
    cfg = cfg or DuffingConfig()
    t, x, _ = duffing_trajectory(cfg)
    edges = bin_edges(x, cfg.n_bins)
    bins = assign_bins(x, edges)
    continuous = TimeSeries(t, x, "time", columns=("x",))
    binned = TimeSeries(np.arange(t.size, dtype=float), bins.astype(float), "sample", columns=("bin",))
    return continuous, binned, edges


def gen_from_model(model, times, seed=0):
    """One draw per time from the model's predicted distributions."""
    times = np.asarray(times, dtype=float).ravel()
    return TimeSeries(times, model.sample(times, random_state=seed))


GENERATORS = {
    "gaussian": gen_gaussian,
    "gamma": gen_gamma,
    "duffing": duffing_series,
}
