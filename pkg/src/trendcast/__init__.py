"""Decode weekly search-index series with a Wiener cascade model."""

from .cascade import CascadeConfig, WienerCascadeModel, feature_importance, predict, train
from .dataset import Dataset, make_fold_plan, parse_trends_csv
from .evaluation import CvReport, EvalMetrics, cross_validate, mse, spearman_pvalue, spearman_rho
from .selection import Mode, SelectionScope, SelectionSpec, select_features
from .wavelet import FrequencyGrid, PeriodClass, morlet_cwt, rank_periodic

__version__ = "0.1.0"
