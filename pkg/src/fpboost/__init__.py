"""Gradient-boosted mixtures of parametric hazard heads for survival analysis."""

from .boost import (
    ConfigError,
    FPBoostConfig,
    FPBoostModel,
    Init,
    ModelFormatError,
    TrainTrace,
    fit,
    load_model,
    loss,
    pseudo_residuals,
    save_model,
)
from .data import (
    CsvSchema,
    DataValidationError,
    SchemaError,
    StepFunction,
    SurvivalDataset,
    censoring_km,
    kaplan_meier,
    load_csv,
    simulate_weibull_mixture,
    stratified_split,
)
from .heads import Activation, Family, HeadParams
from .metrics import EvaluationReport, brier_score, c_index, c_td, cumulative_auc, ibs
from .tune import SearchSpace, random_search

__version__ = "0.1.0"
