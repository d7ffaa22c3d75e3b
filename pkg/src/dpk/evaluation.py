"""Scoring: pinball loss, baseline-relative score, calibration residuals and
point-forecast skill scores."""

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import special
from .distributions import SkewNormal, get_family

__all__ = [
    "QuantileForecastTable",
    "ResidualReport",
    "SkillScores",
    "pinball",
    "pinball_score",
    "pinball_score_loop",
    "relative_score",
    "standardized_residuals",
    "deskew",
    "deskewed_residuals",
    "skill_scores",
]

DESKEW_CLAMP = 8.0


@dataclass(frozen=True)
class QuantileForecastTable:
    """Quantile forecasts; ``levels`` are percentages, ``values`` is (n_times, n_levels)."""

    times: np.ndarray
    levels: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        levels = tuple(float(q) for q in self.levels)
        if values.ndim != 2 or values.shape[1] != len(levels):
            raise ValueError("values must have one column per level")
        if any(not 0 < q < 100 for q in levels):
            raise ValueError("levels are percentages strictly inside (0, 100)")
        order = np.argsort(levels)
        if np.any(np.diff(values[:, order], axis=1) < 0):
            raise ValueError("quantile values must be non-decreasing across levels")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)


class ResidualReport(NamedTuple):
    residuals: np.ndarray
    mean_bias: float
    rms: float


class SkillScores(NamedTuple):
    nmb: float
    nrmse: float
    pearson: float


def pinball(forecast_value, level_q_percent, observed):
    """Quantile loss for a forecast of the ``q``-th percentile.

    ``(1 - q/100) (xhat - x)`` if ``xhat > x`` else ``(q/100) (x - xhat)``.
    """
    xhat = np.asarray(forecast_value, dtype=float)
    x = np.asarray(observed, dtype=float)
    q = np.asarray(level_q_percent, dtype=float) / 100.0
    if np.any(~((q > 0) & (q < 1))):
        raise ValueError("quantile level must lie strictly inside (0, 100)")
    return np.where(xhat > x, (1.0 - q) * (xhat - x), q * (x - xhat))


def pinball_score(table, observed):
    """Average pinball loss over all times and levels.

    The sum is exactly rounded (``math.fsum``), so the result does not depend
    on summation order.
    """
    x = np.asarray(observed, dtype=float).ravel()
    if x.size != table.values.shape[0]:
        raise ValueError("one observation per forecast time is required")
    losses = pinball(table.values, np.asarray(table.levels)[None, :], x[:, None])
    return math.fsum(losses.ravel().tolist()) / losses.size


def pinball_score_loop(table, observed):
    """Element-by-element reference for :func:`pinball_score`."""
    terms = []
    for i, x in enumerate(np.asarray(observed, dtype=float).ravel().tolist()):
        for j, level in enumerate(table.levels):
            xhat = float(table.values[i, j])
            q = level / 100.0
            terms.append((1.0 - q) * (xhat - x) if xhat > x else q * (x - xhat))
    return math.fsum(terms) / len(terms)


def relative_score(e_model, e_baseline):
    """Percentage improvement over a baseline error: ``(1 - E / E_base) * 100``."""
    if not e_baseline > 0:
        raise ValueError("baseline error must be positive (zero baseline)")
    return (1.0 - e_model / e_baseline) * 100.0


def _report(r):
    r = np.asarray(r, dtype=float)
    return ResidualReport(r, float(np.mean(r)), float(np.sqrt(np.mean(r * r))))


def standardized_residuals(observed, params, family):
    """``(x - mean) / std`` using the distribution's own moments at each time."""
    family = get_family(family)
    if not family.continuous:
        raise ValueError(f"standardized residuals need a continuous family, not {family.name}")
    x = np.asarray(observed, dtype=float)
    return _report((x - family.mean(params)) / family.std(params))


def deskew(observed, params):
    """Map observations through the skew-normal CDF and the normal quantile.

    Points whose CDF is indistinguishable from 0 or 1 are clamped to
    ``+-8`` and counted in a warning.
    """
    fam = SkewNormal()
    p = np.asarray(fam.cdf(params, observed), dtype=float)
    lo, hi = special.ndtr(-DESKEW_CLAMP), special.ndtr(DESKEW_CLAMP)
    low, high = p <= lo, p >= hi
    z = np.empty_like(p)
    mid = ~(low | high)
    z[mid] = special.ndtri(p[mid])
    z[low] = -DESKEW_CLAMP
    z[high] = DESKEW_CLAMP
    n_clamped = int(low.sum() + high.sum())
    if n_clamped:
        warnings.warn(f"deskew clamped {n_clamped} points to +-{DESKEW_CLAMP:g}", RuntimeWarning, stacklevel=2)
    return z


def deskewed_residuals(observed, params):
    """Bias and RMS of de-skewed residuals under per-time skew-normal parameters."""
    return _report(deskew(observed, params))


def skill_scores(point_forecast, observed):
    """Normalized mean bias, range-normalized RMSE and Pearson correlation.

    The normalizing range is ``x_0.95 - x_0.05`` with linearly interpolated
    empirical quantiles of the observations.
    """
    xhat = np.asarray(point_forecast, dtype=float).ravel()
    x = np.asarray(observed, dtype=float).ravel()
    if xhat.shape != x.shape or x.size < 2:
        raise ValueError("need matching forecast and observation arrays with at least 2 points")
    total = x.sum()
    if total == 0:
        raise ValueError("NMB undefined: observations sum to zero")
    spread = np.quantile(x, 0.95) - np.quantile(x, 0.05)
    if not spread > 0:
        raise ValueError("NRMSE undefined: 5%-95% range of observations is zero")
    if np.std(x) == 0 or np.std(xhat) == 0:
        raise ValueError("Pearson correlation undefined for a constant series")
    err = xhat - x
    nmb = float(err.sum() / total)
    nrmse = float(np.sqrt(np.mean(err * err)) / spread)
    pearson = float(np.corrcoef(xhat, x)[0, 1])
    return SkillScores(nmb, nrmse, pearson)
