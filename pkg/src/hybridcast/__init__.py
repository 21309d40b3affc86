"""Two-stage forecasting toolkit for dated panels.

Stage one screens exogenous indicators with penalized regression (ridge
keeps a broad significant set, SCAD prunes to a sparse support); stage
two trains a dilated-convolution + LSTM forecaster on the selected
features, with a harness that compares the architecture variants.
"""

from .errors import (
    ConfigError,
    DataError,
    HybridcastError,
    NumericalError,
    ParameterError,
)
from .neural import ForecastModel, ModelConfig
from .pipeline import TimeSeriesFrame, compare_variants, evaluate, train_model
from .regsel import PenaltySpec, RegressionFit, SelectionReport
from .synth import SyntheticSpec, generate_synthetic_panel

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "ForecastModel",
    "HybridcastError",
    "ModelConfig",
    "NumericalError",
    "ParameterError",
    "PenaltySpec",
    "RegressionFit",
    "SelectionReport",
    "SyntheticSpec",
    "TimeSeriesFrame",
    "compare_variants",
    "evaluate",
    "generate_synthetic_panel",
    "train_model",
    "__version__",
]
