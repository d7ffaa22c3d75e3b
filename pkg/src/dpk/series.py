"""Time-series containers, sinusoidal features, normalization and preprocessing."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConstantSeriesError, ConvergenceError, NonUniformSamplingError

__all__ = [
    "TimeSeries",
    "FrequencySpec",
    "NormalizationState",
    "SinusoidalEncoder",
    "encode",
    "normalize",
    "pca_first_component",
    "suggest_frequencies",
    "read_csv",
    "write_csv",
    "format_float",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Timestamped observations; ``values`` has shape ``(n, d)``.

    Use :meth:`from_arrays` to build from raw data with NaN rows dropped.
    """

    times: np.ndarray
    values: np.ndarray
    unit_label: str = ""
    n_dropped: int = 0
    columns: tuple = ()

    def __post_init__(self):
        times = _frozen(self.times).ravel()
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("values must be one- or two-dimensional")
        if values.shape[0] != times.shape[0]:
            raise ValueError(f"{times.shape[0]} times but {values.shape[0]} value rows")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("times and values must be finite; use TimeSeries.from_arrays to drop NaN rows")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        columns = tuple(self.columns) or tuple(f"x{i}" if values.shape[1] > 1 else "x" for i in range(values.shape[1]))
        if len(columns) != values.shape[1]:
            raise ValueError("one column name per value dimension is required")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "columns", columns)

    @classmethod
    def from_arrays(cls, times, values, unit_label="", columns=()):
        """Build a series, dropping any row with a non-finite time or value."""
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        keep = np.isfinite(times) & np.all(np.isfinite(values), axis=1)
        return cls(times[keep], values[keep], unit_label, int((~keep).sum()), tuple(columns))

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def x(self):
        """Values of a univariate series as a 1-D array."""
        if self.dim != 1:
            raise ValueError(f"series has {self.dim} dimensions; select one first")
        return self.values[:, 0]

    def window(self, start=None, stop=None):
        """Rows with ``start <= t < stop``."""
        keep = np.ones(len(self), dtype=bool)
        if start is not None:
            keep &= self.times >= start
        if stop is not None:
            keep &= self.times < stop
        return TimeSeries(self.times[keep], self.values[keep], self.unit_label, 0, self.columns)

    def select(self, column):
        i = self.columns.index(column) if isinstance(column, str) else int(column)
        return TimeSeries(self.times, self.values[:, i], self.unit_label, self.n_dropped, (self.columns[i],))


@dataclass(frozen=True)
class FrequencySpec:
    """Fixed angular frequencies (radians per time unit) plus optional trend input."""

    omegas: tuple = ()
    include_trend: bool = False
    trend_scale: float = 1.0

    def __post_init__(self):
        omegas = tuple(float(w) for w in np.atleast_1d(np.asarray(self.omegas, dtype=float)))
        object.__setattr__(self, "omegas", omegas)
        if not omegas and not self.include_trend:
            raise ValueError("at least one frequency is required unless the trend input is enabled")
        if any(not (w > 0 and math.isfinite(w)) for w in omegas):
            raise ValueError("angular frequencies must be positive and finite")
        if len(set(omegas)) != len(omegas):
            raise ValueError("angular frequencies must be pairwise distinct")
        if not (self.trend_scale > 0 and math.isfinite(self.trend_scale)):
            raise ValueError("trend_scale must be positive")

    @classmethod
    def from_periods(cls, periods, include_trend=False, trend_scale=1.0):
        return cls(tuple(2.0 * math.pi / float(p) for p in periods), include_trend, trend_scale)

    @property
    def n_features(self):
        return 2 * len(self.omegas) + int(self.include_trend)

    def to_dict(self):
        return {"omegas": list(self.omegas), "include_trend": bool(self.include_trend),
                "trend_scale": float(self.trend_scale)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["omegas"]), bool(data["include_trend"]), float(data["trend_scale"]))


def encode(t, spec, t0=0.0):
    """Features ``[cos(w t), sin(w t)]`` with an optional ``(t - t0) / trend_scale`` column.

    Scalar ``t`` gives a vector of length ``spec.n_features``; an array of
    times gives a matrix with one row per time.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t).ravel()
    w = np.asarray(spec.omegas, dtype=float)
    phase = np.outer(t, w)
    cols = [np.cos(phase), np.sin(phase)]
    if spec.include_trend:
        cols.append(((t - t0) / spec.trend_scale)[:, None])
    out = np.concatenate(cols, axis=1)
    return out[0] if scalar else out


class SinusoidalEncoder(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`encode`.

    ``fit`` records the start time and, if ``trend_scale`` is None, uses the
    span of the fitted times as the trend scale.
    """

    def __init__(self, omegas=(), include_trend=False, trend_scale=None):
        self.omegas = omegas
        self.include_trend = include_trend
        self.trend_scale = trend_scale

    def fit(self, X, y=None):
        t = np.asarray(X, dtype=float).ravel()
        self.t0_ = float(t.min()) if t.size else 0.0
        scale = self.trend_scale
        if scale is None:
            span = float(t.max() - t.min()) if t.size else 0.0
            scale = span if span > 0 else 1.0
        self.spec_ = FrequencySpec(tuple(self.omegas), bool(self.include_trend), float(scale))
        self.n_features_out_ = self.spec_.n_features
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        return encode(np.asarray(X, dtype=float).ravel(), self.spec_, self.t0_)


@dataclass(frozen=True)
class NormalizationState:
    """Per-dimension affine standardization (population standard deviation)."""

    mean: tuple = (0.0,)
    std: tuple = (1.0,)
    enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(m) for m in np.atleast_1d(self.mean)))
        object.__setattr__(self, "std", tuple(float(s) for s in np.atleast_1d(self.std)))
        if len(self.mean) != len(self.std):
            raise ValueError("mean and std must have one entry per dimension")
        if self.enabled and any(not s > 0 for s in self.std):
            raise ValueError("std must be positive when normalization is enabled")

    @classmethod
    def identity(cls, dim=1):
        return cls((0.0,) * dim, (1.0,) * dim, False)

    @property
    def loc(self):
        return self.mean[0] if self.enabled else 0.0

    @property
    def scale(self):
        return self.std[0] if self.enabled else 1.0

    def apply(self, values):
        values = np.asarray(values, dtype=float)
        if not self.enabled:
            return values
        return (values - np.asarray(self.mean)) / np.asarray(self.std) if values.ndim == 2 \
            else (values - self.mean[0]) / self.std[0]

    def invert(self, values):
        values = np.asarray(values, dtype=float)
        if not self.enabled:
            return values
        return values * np.asarray(self.std) + np.asarray(self.mean) if values.ndim == 2 \
            else values * self.std[0] + self.mean[0]

    def to_dict(self):
        return {"mean": list(self.mean), "std": list(self.std), "enabled": bool(self.enabled)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["mean"]), tuple(data["std"]), bool(data["enabled"]))


def normalize(series):
    """Standardize each dimension to mean 0 and population std 1."""
    if len(series) == 0:
        raise ValueError("cannot normalize an empty series")
    mean = series.values.mean(axis=0)
    std = series.values.std(axis=0)
    if np.any(std == 0):
        raise ConstantSeriesError("constant series: zero variance, cannot normalize")
    state = NormalizationState(tuple(mean), tuple(std), True)
    out = TimeSeries(series.times, state.apply(series.values), series.unit_label, series.n_dropped, series.columns)
    return out, state


def pca_first_component(series, tol=1e-10, max_iter=10_000):
    """Project a multichannel series onto its dominant principal axis.

    Returns ``(projected_series, loading)``; the loading has unit norm and its
    largest-magnitude entry is positive.
    """
    X = series.values
    n, d = X.shape
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} samples for {d} channels, got {n}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / n
    # start from the covariance column with the most energy; it cannot be
    # orthogonal to the leading eigenvector unless cov is degenerate
    v = cov[:, np.argmax(np.sum(cov * cov, axis=0))].copy()
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("all channels are constant")
    v /= norm
    change = np.inf
    for _ in range(max_iter):
        w = cov @ v
        w /= np.linalg.norm(w)
        if w @ v < 0:
            w = -w
        change = np.linalg.norm(w - v)
        v = w
        if change < tol:
            break
    else:
        raise ConvergenceError("power iteration for the leading principal axis did not converge", change)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    proj = centered @ v
    return TimeSeries(series.times, proj, series.unit_label, series.n_dropped, ("pc1",)), v


def suggest_frequencies(series, k):
    """Largest local maxima of the periodogram as ``(omega, power)`` pairs.

    Requires uniformly spaced times. Powers are ``|DFT|^2`` of the
    mean-removed series; results are sorted by descending power.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t = series.times
    x = series.x
    if len(t) < 3:
        return []
    dt = np.diff(t)
    step = dt.mean()
    if np.max(np.abs(dt - step)) > 1e-9 * step:
        raise NonUniformSamplingError("frequency suggestion needs uniformly spaced times; "
                                      "supply angular frequencies manually")
    centered = x - x.mean()
    if np.max(np.abs(centered)) <= 1e-12 * max(1.0, abs(x.mean())):
        return []
    power = np.abs(np.fft.rfft(centered)) ** 2
    n = len(x)
    inner = np.arange(1, power.size - 1)
    peaks = inner[(power[inner] > power[inner - 1]) & (power[inner] > power[inner + 1])]
    last = power.size - 1
    if last > 1 and power[last] > power[last - 1]:
        peaks = np.append(peaks, last)
    order = peaks[np.argsort(-power[peaks], kind="stable")][:k]
    return [(2.0 * math.pi * j / (n * step), float(power[j])) for j in order]


def format_float(v):
    """17 significant digits; enough for an exact float round trip."""
    return format(float(v), ".17g")


def read_csv(path, value_columns=None, time_column="t", unit_label=""):
    """Read a header-first CSV with a time column and one or more value columns.

    Rows with missing or non-numeric values are dropped and counted in
    ``TimeSeries.n_dropped``. Rows are sorted by time.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if time_column not in header:
            raise ValueError(f"{path}: missing time column {time_column!r}")
        if value_columns is None:
            value_columns = [h for h in header if h != time_column]
        value_columns = list(value_columns)
        missing = [c for c in value_columns if c not in header]
        if missing or not value_columns:
            raise ValueError(f"{path}: missing value columns {missing or '(none)'}")
        ti = header.index(time_column)
        vi = [header.index(c) for c in value_columns]
        times, rows = [], []
        for row in reader:
            if not row:
                continue
            times.append(_parse(row, ti))
            rows.append([_parse(row, i) for i in vi])
    times = np.asarray(times, dtype=float)
    values = np.asarray(rows, dtype=float).reshape(len(rows), len(vi))
    order = np.argsort(times, kind="stable")
    return TimeSeries.from_arrays(times[order], values[order], unit_label, tuple(value_columns))


def _parse(row, i):
    try:
        return float(row[i])
    except (IndexError, ValueError):
        return float("nan")


def write_csv(path, columns, header=None):
    """Write equal-length columns (a dict or a TimeSeries) with full precision."""
    if isinstance(columns, TimeSeries):
        data = {"t": columns.times}
        data.update({c: columns.values[:, i] for i, c in enumerate(columns.columns)})
        columns = data
    names = list(header or columns.keys())
    arrays = [np.asarray(columns[n]).ravel() for n in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([format_float(v) for v in row])
