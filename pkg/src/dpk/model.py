"""Sinusoid-driven probabilistic forecaster.

One small tanh network per distribution parameter reads the fixed features
``[cos(w t), sin(w t)]`` (plus an optional scaled trend column) and predicts
that parameter at time ``t``. Networks are trained jointly by minimizing the
(optionally time-weighted) mean negative log-likelihood with plain SGD.

Because the features are periodic, forecasts at any horizon are a single
forward pass; nothing is stepped forward in time.
"""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import net
from .distributions import Family, get_family
from .exceptions import ConstantSeriesError, DivergenceError, ParameterError
from .series import FrequencySpec, NormalizationState, TimeSeries, encode

__all__ = [
    "DPKForecaster",
    "WeightingConfig",
    "TrainConfig",
    "Forecast",
    "weight",
    "auto_epochs",
    "train",
    "predict_params",
    "loss",
    "forecast",
    "MODEL_FORMAT",
    "MODEL_VERSION",
]

log = logging.getLogger(__name__)

MODEL_FORMAT = "dpk-model"
MODEL_VERSION = 1
AUTO_EPOCH_BUDGET = 2_000_000


@dataclass(frozen=True)
class WeightingConfig:
    """Time-of-year and recency weighting of the training loss.

    ``W(t) = [1 + toy_amp cos(2 pi (t - test_mid) / period)]
    * [sigmoid((t - recency_center) / recency_scale) + recency_shift]``

    All times share the units and origin of the training data.
    """

    period: float
    test_mid: float
    recency_center: float
    recency_scale: float
    toy_amp: float = 0.4
    recency_shift: float = 0.747

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("weighting period must be positive")
        if not self.recency_scale > 0:
            raise ValueError("recency_scale must be positive")

    @classmethod
    def for_years(cls, test_mid, year=1.0, origin=0.0):
        """Standard load-forecast constants (center 8.25 years, scale 1.1 years) in units where
        one year equals ``year`` and the training data starts at ``origin``."""
        return cls(period=year, test_mid=test_mid, recency_center=origin + 8.25 * year,
                   recency_scale=1.1 * year)

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in
                ("period", "test_mid", "recency_center", "recency_scale", "toy_amp", "recency_shift")}


def _sigmoid(u):
    return np.exp(-np.logaddexp(0.0, -u))


def time_of_year_factor(t, cfg):
    t = np.asarray(t, dtype=float)
    return 1.0 + cfg.toy_amp * np.cos(2.0 * math.pi * (t - cfg.test_mid) / cfg.period)


def recency_factor(t, cfg):
    t = np.asarray(t, dtype=float)
    return _sigmoid((t - cfg.recency_center) / cfg.recency_scale) + cfg.recency_shift


def weight(t, cfg):
    """Loss weight at time(s) ``t``; ``cfg=None`` means uniform weight 1."""
    if cfg is None:
        return np.ones_like(np.asarray(t, dtype=float))
    return time_of_year_factor(t, cfg) * recency_factor(t, cfg)


def auto_epochs(n_points):
    """Epoch count that keeps the number of sample visits near two million."""
    if n_points < 1:
        raise ValueError("need at least one training point")
    return max(1, AUTO_EPOCH_BUDGET // int(n_points))


@dataclass(frozen=True)
class TrainConfig:
    sgd: net.SgdConfig = field(default_factory=net.SgdConfig)
    epochs: object = 100
    weighting: WeightingConfig = None
    confidence_mode: str = "off"
    partition_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs != "auto" and (isinstance(self.epochs, bool) or int(self.epochs) < 0):
            raise ValueError("epochs must be a non-negative integer or 'auto'")
        if self.confidence_mode not in ("off", "partitioned"):
            raise ValueError("confidence_mode must be 'off' or 'partitioned'")
        if not 0 < self.partition_fraction < 1:
            raise ValueError("partition_fraction must lie in (0, 1)")

    def resolve_epochs(self, n_points):
        return auto_epochs(n_points) if self.epochs == "auto" else int(self.epochs)


@dataclass
class Forecast:
    """Per-time parameters (data units), quantiles and means."""

    times: np.ndarray
    params: dict
    levels: tuple
    quantiles: np.ndarray
    mean: np.ndarray

    def quantile_columns(self):
        return [f"q{lv:g}" for lv in self.levels]

    def param_columns(self):
        cols = {}
        for name, v in self.params.items():
            v = np.asarray(v)
            if v.ndim == 2:
                for j in range(v.shape[1]):
                    cols[f"{name}{j}"] = v[:, j]
            else:
                cols[name] = v
        return cols

    def to_columns(self):
        """Ordered columns: ``t``, parameters, ``q<level>`` per level, ``mean``."""
        cols = {"t": self.times}
        cols.update(self.param_columns())
        for j, name in enumerate(self.quantile_columns()):
            cols[name] = self.quantiles[:, j]
        cols["mean"] = self.mean
        return cols


def _check_times(X):
    if isinstance(X, TimeSeries):
        return X.times
    t = check_array(X, ensure_2d=False, dtype=float, ensure_all_finite=True,
                    ensure_min_samples=0)
    if t.ndim == 2:
        if t.shape[1] != 1:
            raise ValueError(f"expected a single time column, got shape {t.shape}")
        t = t[:, 0]
    return t


def _check_levels(levels):
    levels = tuple(float(q) for q in np.atleast_1d(levels))
    if any(not 0 < q < 1 for q in levels):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    return levels


class DPKForecaster(BaseEstimator):
    """Probabilistic forecaster driven by fixed sinusoidal features.

    Parameters
    ----------
    family : str or Family, default="normal"
        One of ``normal``, ``skewnormal``, ``gamma``, ``poisson``,
        ``categorical``.
    n_categories : int, optional
        Number of bins for the categorical family.
    periods, omegas : sequence of float, optional
        Frequencies as periods (time units) or angular frequencies; give
        exactly one unless only the trend input is used.
    include_trend : bool, default=False
        Append ``(t - t0) / trend_scale`` to the features.
    trend_scale : float, optional
        Defaults to the span of the training times.
    hidden : tuple of int, default=(256, 64)
        Hidden widths of every head; ``head_hidden`` overrides per parameter.
    output_scale : float or dict, default=1.0
        Multiplier on a head's output (a dict maps parameter name to scale).
    learning_rate, weight_decay, batch_size : SGD settings.
    epochs : int or "auto", default=100
        ``"auto"`` uses ``floor(2e6 / n_train)``.
    weighting : WeightingConfig or dict, optional
        Recency / time-of-year weights on the training loss.
    confidence_mode : {"off", "partitioned"}, default="off"
        ``partitioned`` trains the location/shape heads on the newer data and
        then the scale head alone on the oldest ``partition_fraction``.
    normalize : {"auto", True, False}, default="auto"
        Standardize observations before training. ``auto`` enables it for
        the normal and skew-normal families; it is never used for the
        others.
    log_cdf : {"auto", "exact", "approx"}, default="auto"
        How the skew-normal likelihood evaluates ``log Phi``.
    random_state : int, default=0
    verbose : int, default=0
        Log the epoch loss every ``verbose`` epochs.

    Attributes
    ----------
    family_ : Family
    spec_ : FrequencySpec
    t0_ : float
    norm_ : NormalizationState
    heads_ : list of MlpParams
    head_configs_ : list of MlpConfig
    loss_history_ : list of float
    n_epochs_ : int
    """

    def __init__(self, family="normal", *, n_categories=None, periods=None, omegas=None,
                 include_trend=False, trend_scale=None, hidden=(256, 64), head_hidden=None,
                 output_scale=1.0, learning_rate=1e-4, weight_decay=1e-3, batch_size=256,
                 epochs=100, weighting=None, confidence_mode="off", partition_fraction=0.2,
                 normalize="auto", log_cdf="auto", random_state=0, verbose=0):
        self.family = family
        self.n_categories = n_categories
        self.periods = periods
        self.omegas = omegas
        self.include_trend = include_trend
        self.trend_scale = trend_scale
        self.hidden = hidden
        self.head_hidden = head_hidden
        self.output_scale = output_scale
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.weighting = weighting
        self.confidence_mode = confidence_mode
        self.partition_fraction = partition_fraction
        self.normalize = normalize
        self.log_cdf = log_cdf
        self.random_state = random_state
        self.verbose = verbose

    # configuration -------------------------------------------------------

    def _make_family(self):
        if isinstance(self.family, Family):
            return self.family
        tag = str(self.family).lower().replace("_", "").replace("-", "")
        if tag == "categorical":
            if self.n_categories is None:
                raise ValueError("categorical family requires n_categories")
            return get_family(tag, n_categories=self.n_categories)
        if tag == "skewnormal":
            return get_family(tag, log_cdf=self.log_cdf)
        return get_family(tag)

    def _make_omegas(self):
        if self.periods is not None and self.omegas is not None:
            raise ValueError("give either periods or omegas, not both")
        if self.periods is not None:
            periods = [float(p) for p in np.atleast_1d(self.periods)]
            if any(not p > 0 for p in periods):
                raise ValueError("periods must be positive")
            return tuple(2.0 * math.pi / p for p in periods)
        if self.omegas is not None:
            return tuple(float(w) for w in np.atleast_1d(self.omegas))
        return ()

    def _uses_normalization(self, family):
        if self.normalize == "auto":
            return family.location_scale
        if self.normalize and not family.location_scale:
            raise ValueError(f"normalization is not supported for the {family.name} family")
        return bool(self.normalize)

    def _weighting(self):
        w = self.weighting
        if w is None or isinstance(w, WeightingConfig):
            return w
        return WeightingConfig(**w)

    def train_config(self):
        return TrainConfig(
            sgd=net.SgdConfig(float(self.learning_rate), float(self.weight_decay), int(self.batch_size),
                              int(self.random_state)),
            epochs=self.epochs,
            weighting=self._weighting(),
            confidence_mode=self.confidence_mode,
            partition_fraction=float(self.partition_fraction),
        )

    def _head_configs(self, family, input_dim):
        overrides = self.head_hidden or {}
        scales = self.output_scale if isinstance(self.output_scale, dict) else {}
        default_scale = 1.0 if isinstance(self.output_scale, dict) else float(self.output_scale)
        unknown = (set(overrides) | set(scales)) - set(family.param_names)
        if unknown:
            raise ValueError(f"unknown parameter names {sorted(unknown)} for {family.name}")
        return [net.MlpConfig(input_dim, tuple(overrides.get(name, self.hidden)), n_out,
                              float(scales.get(name, default_scale)))
                for name, n_out in zip(family.param_names, family.head_outputs)]

    # construction -----------------------------------------------------------

    def initialize(self, X, y=None):
        """Set up encoder, normalization and freshly initialized heads without training."""
        t = _check_times(X)
        family = self._make_family()
        omegas = self._make_omegas()
        t0 = float(t.min()) if t.size else 0.0
        scale = self.trend_scale
        if scale is None:
            span = float(t.max() - t.min()) if t.size else 0.0
            scale = span if span > 0 else 1.0
        self.family_ = family
        self.spec_ = FrequencySpec(omegas, bool(self.include_trend), float(scale))
        self.t0_ = t0
        if y is not None and self._uses_normalization(family):
            y = np.asarray(y, dtype=float).ravel()
            std = float(y.std())
            if std == 0:
                raise ConstantSeriesError("constant series: zero variance, cannot normalize")
            self.norm_ = NormalizationState((float(y.mean()),), (std,), True)
        else:
            self.norm_ = NormalizationState.identity()
        self.head_configs_ = self._head_configs(family, self.spec_.n_features)
        seeds = np.random.SeedSequence(int(self.random_state)).spawn(len(self.head_configs_))
        self.heads_ = [net.init(cfg, int(s.generate_state(1)[0])) for cfg, s in zip(self.head_configs_, seeds)]
        self.loss_history_ = []
        self.n_epochs_ = 0
        return self

    @classmethod
    def from_heads(cls, family, spec, heads, norm=None, t0=0.0, **params):
        """Assemble a ready-to-use model from explicit head parameters."""
        family = get_family(family)
        model = cls(family=family, omegas=list(spec.omegas), include_trend=spec.include_trend,
                    trend_scale=spec.trend_scale, **params)
        if len(heads) != len(family.param_names):
            raise ValueError(f"{family.name} needs {len(family.param_names)} heads, got {len(heads)}")
        for h, n_out in zip(heads, family.head_outputs):
            if h.input_dim != spec.n_features or h.output_dim != n_out:
                raise ValueError("head shape does not match the encoder and family")
        model.family_ = family
        model.spec_ = spec
        model.t0_ = float(t0)
        model.norm_ = norm or NormalizationState.identity()
        model.heads_ = [h.copy() for h in heads]
        model.head_configs_ = [net.MlpConfig(h.input_dim, tuple(w.shape[0] for w in h.weights[:-1]),
                                             h.output_dim, h.output_scale) for h in heads]
        model.loss_history_ = []
        model.n_epochs_ = 0
        return model

    # fitting ----------------------------------------------------------------

    def fit(self, X, y=None):
        """Fit on times ``X`` and observations ``y`` (or a univariate TimeSeries)."""
        if isinstance(X, TimeSeries):
            X, y = X.times, X.x
        t = _check_times(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != t.shape[0]:
            raise ValueError(f"{t.shape[0]} times but {y.shape[0]} observations")
        keep = np.isfinite(y)
        t, y = t[keep], y[keep]
        order = np.argsort(t, kind="stable")
        t, y = t[order], y[order]
        self.initialize(t, y)
        self._train(t, y, self.train_config())
        return self

    def _prepare_targets(self, y):
        y = self.family_.check_support(np.asarray(y, dtype=float).ravel())
        return self.norm_.apply(y)

    def _forward_all(self, feats, cache=False):
        return [net.forward(h, feats, return_cache=cache) for h in self.heads_]

    def _batch_grads(self, feats, z, w, heads):
        """Weighted mean NLL of a batch and raw-output gradients for ``heads``."""
        outs = self._forward_all(feats, cache=True)
        values, raw_grads = self.family_.nll_raw([o[0] for o in outs], z)
        n = z.shape[0]
        batch_loss = float(np.dot(w, values) / n)
        grads = {}
        for i in heads:
            upstream = raw_grads[i] * (w / n)[:, None]
            grads[i] = net.backward(self.heads_[i], feats, upstream, cache=outs[i][1])[0]
        return batch_loss, grads

    def _run_epochs(self, feats, z, w, heads, epochs, sgd, rng, start_epoch=0):
        n = z.shape[0]
        bs = min(int(sgd.batch_size), n)
        history = []
        for epoch in range(epochs):
            perm = rng.permutation(n)
            total = 0.0
            for s in range(0, n, bs):
                idx = perm[s:s + bs]
                try:
                    batch_loss, grads = self._batch_grads(feats[idx], z[idx], w[idx], heads)
                except ParameterError as exc:
                    raise DivergenceError(f"divergence detected: {exc}", start_epoch + epoch) from None
                if not math.isfinite(batch_loss):
                    raise DivergenceError("divergence detected: non-finite loss", start_epoch + epoch)
                total += batch_loss * idx.size
                for i, g in grads.items():
                    try:
                        self.heads_[i] = net.sgd_step(self.heads_[i], g, sgd)
                    except DivergenceError as exc:
                        raise DivergenceError(str(exc), start_epoch + epoch) from None
            history.append(total / n)
            if self.verbose and (epoch % int(self.verbose) == 0 or epoch == epochs - 1):
                log.info("epoch %d loss %.6f", start_epoch + epoch, history[-1])
        return history

    def _train(self, t, y, cfg):
        check_is_fitted(self, "heads_")
        t = np.asarray(t, dtype=float).ravel()
        if t.size == 0:
            raise ValueError("no training data")
        z = self._prepare_targets(y)
        epochs = cfg.resolve_epochs(t.size)
        feats = encode(t, self.spec_, self.t0_)
        w = weight(t, cfg.weighting)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.sgd.seed).spawn(1)[0])
        all_heads = list(range(len(self.heads_)))
        if cfg.confidence_mode == "off":
            history = self._run_epochs(feats, z, w, all_heads, epochs, cfg.sgd, rng)
        else:
            scale_name = self.family_.scale_param
            if scale_name is None:
                raise ValueError(f"confidence training needs a scale parameter; {self.family_.name} has none")
            si = self.family_.param_names.index(scale_name)
            order = np.argsort(t, kind="stable")
            n_old = max(1, int(math.ceil(cfg.partition_fraction * t.size)))
            if n_old >= t.size:
                raise ValueError("partition leaves no data for the location heads")
            old, new = order[:n_old], order[n_old:]
            others = [i for i in all_heads if i != si]
            history = self._run_epochs(feats[new], z[new], w[new], others, epochs, cfg.sgd, rng)
            self.confidence_phase_start_ = len(history)
            history += self._run_epochs(feats[old], z[old], w[old], [si], epochs, cfg.sgd, rng,
                                        start_epoch=epochs)
        self.loss_history_ = list(self.loss_history_) + history
        self.n_epochs_ = getattr(self, "n_epochs_", 0) + epochs
        return history

    # inference ----------------------------------------------------------------

    def _normalized_params(self, t):
        feats = encode(t, self.spec_, self.t0_)
        return self.family_.link(self._forward_all(feats))

    def predict_params(self, X):
        """Distribution parameters at times ``X`` in data units."""
        check_is_fitted(self, "heads_")
        t = _check_times(X)
        if t.size == 0:
            return {n: np.zeros((0, k)) if self.family_.name == "categorical" else np.zeros(0)
                    for n, k in zip(self.family_.param_names, self.family_.head_outputs)}
        params = self._normalized_params(t)
        return self.family_.denormalize(params, self.norm_.loc, self.norm_.scale)

    def predict(self, X):
        """Mean of the predicted distribution."""
        params = self.predict_params(X)
        return np.asarray(self.family_.mean(params), dtype=float)

    def predict_quantiles(self, X, levels=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)):
        return self.forecast(X, levels).quantiles

    def forecast(self, X, levels=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)):
        """Parameters, quantiles (one column per level) and means at ``X``."""
        levels = _check_levels(levels)
        t = _check_times(X)
        params = self.predict_params(t)
        if t.size == 0:
            return Forecast(t, params, levels, np.zeros((0, len(levels))), np.zeros(0))
        q = np.column_stack([self.family_.quantile(params, lv) for lv in levels]) if levels \
            else np.zeros((t.size, 0))
        if levels and list(levels) == sorted(levels):
            q = np.maximum.accumulate(q, axis=1)
        return Forecast(t, params, levels, q, np.asarray(self.family_.mean(params), dtype=float))

    def loss(self, X, y, weighting=None):
        """Weighted mean NLL on (normalized) observations; weights default to 1."""
        check_is_fitted(self, "heads_")
        t = _check_times(X)
        z = self._prepare_targets(y)
        values, _ = self.family_.nll_raw(self._forward_all(encode(t, self.spec_, self.t0_)), z)
        return float(np.mean(weight(t, weighting) * values))

    def loss_and_grad(self, X, y, weighting=None):
        """:meth:`loss` together with its gradient for every head."""
        check_is_fitted(self, "heads_")
        t = _check_times(X)
        z = self._prepare_targets(y)
        feats = encode(t, self.spec_, self.t0_)
        value, grads = self._batch_grads(feats, z, weight(t, weighting), range(len(self.heads_)))
        return value, [grads[i] for i in range(len(self.heads_))]

    def score(self, X, y):
        """Negative mean NLL in data units (higher is better)."""
        params = self.predict_params(X)
        return -float(np.mean(self.family_.nll(params, np.asarray(y, dtype=float).ravel())))

    def sample(self, X, random_state=None):
        """Draw one observation per time from the predicted distributions."""
        rng = np.random.default_rng(random_state)
        return self.family_.sample(self.predict_params(X), rng)

    # persistence --------------------------------------------------------------

    def to_dict(self):
        check_is_fitted(self, "heads_")
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "family": self.family_.to_dict(),
            "links": list(self.family_.links),
            "params": list(self.family_.param_names),
            "frequency": self.spec_.to_dict(),
            "normalization": self.norm_.to_dict(),
            "t0": float(self.t0_),
            "n_epochs": int(self.n_epochs_),
            "heads": [net.params_to_dict(h) for h in self.heads_],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != MODEL_FORMAT:
            raise ValueError("not a dpk model file")
        if data.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        family = get_family(data["family"])
        if list(family.links) != list(data["links"]):
            raise ValueError("link specification does not match the family")
        model = cls.from_heads(family, FrequencySpec.from_dict(data["frequency"]),
                               [net.params_from_dict(h) for h in data["heads"]],
                               NormalizationState.from_dict(data["normalization"]), data["t0"])
        model.n_epochs_ = int(data.get("n_epochs", 0))
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# functional wrappers ------------------------------------------------------------


def predict_params(model, t):
    """Parameters at a single time (scalars) or an array of times."""
    scalar = np.ndim(t) == 0
    params = model.predict_params(np.atleast_1d(np.asarray(t, dtype=float)))
    return {k: v[0] for k, v in params.items()} if scalar else params


def loss(model, t, x, weighting=None):
    return model.loss(t, x, weighting)


def train(model, series, cfg):
    """Continue training ``model`` in place on a univariate series.

    Returns ``(model, per-epoch loss history)``. The model must already be
    fitted or initialized (see :meth:`DPKForecaster.initialize`).
    """
    t, y = series.times, series.x
    history = model._train(t, y, cfg)
    return model, history


def forecast(model, times, levels):
    return model.forecast(times, levels)
