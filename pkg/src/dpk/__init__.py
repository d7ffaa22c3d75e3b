"""Deep probabilistic Koopman forecasting.

Small tanh networks read fixed sinusoidal features of time and emit the
parameters of a chosen distribution, trained by maximum likelihood.
"""

from .distributions import Categorical, Gamma, Normal, Poisson, SkewNormal, get_family
from .exceptions import (
    BracketError,
    ConstantSeriesError,
    ConvergenceError,
    DivergenceError,
    DPKError,
    NonUniformSamplingError,
    ParameterError,
    SupportError,
)
from .model import DPKForecaster, Forecast, TrainConfig, WeightingConfig
from .series import FrequencySpec, NormalizationState, SinusoidalEncoder, TimeSeries

__version__ = "0.1.0"

__all__ = [
    "Categorical",
    "Gamma",
    "Normal",
    "Poisson",
    "SkewNormal",
    "get_family",
    "BracketError",
    "ConstantSeriesError",
    "ConvergenceError",
    "DivergenceError",
    "DPKError",
    "NonUniformSamplingError",
    "ParameterError",
    "SupportError",
    "DPKForecaster",
    "Forecast",
    "TrainConfig",
    "WeightingConfig",
    "FrequencySpec",
    "NormalizationState",
    "SinusoidalEncoder",
    "TimeSeries",
    "__version__",
]
