"""Kernel quantile-regression prediction intervals: SVQR, sparse SVQR, LS-SVR,
tube loss, split conformal calibration, feature selection and forecasting."""

__version__ = "0.1.0"

from .kernels import KernelSpec, gram_matrix, kernel_eval
from .losses import TubeParams, cwc, pinball, tube_loss
from .data import Dataset, generate_ad, generate_sparse_linear, read_csv, true_quantile
from .models import (
    FitReport, KernelModel, fit_lssvr, fit_ssvqr, fit_svqr, fit_tube, predict, sparsity,
)
from .metrics import ExperimentReport, evaluate_interval, mpiw, pice, picp
from .interval import (
    PredictionInterval, build_interval, grid_search, pi_lssvr, pi_ssvqr, pi_svqr, pi_tube,
    tune_qbar,
)
from .conformal import calibrate, conformal_quantile, conformalize, split_train_calibrate
from .featsel import refit_on_selection, select_features
from .forecast import TimeSeries, chrono_split, forecast_pi, lag_embed, read_series

__all__ = [
    "KernelSpec", "gram_matrix", "kernel_eval", "TubeParams", "cwc", "pinball", "tube_loss",
    "Dataset", "generate_ad", "generate_sparse_linear", "read_csv", "true_quantile",
    "FitReport", "KernelModel", "fit_lssvr", "fit_ssvqr", "fit_svqr", "fit_tube", "predict",
    "sparsity", "ExperimentReport", "evaluate_interval", "mpiw", "pice", "picp",
    "PredictionInterval", "build_interval", "grid_search", "pi_lssvr", "pi_ssvqr", "pi_svqr",
    "pi_tube", "tune_qbar", "calibrate", "conformal_quantile", "conformalize",
    "split_train_calibrate", "refit_on_selection", "select_features", "TimeSeries",
    "chrono_split", "forecast_pi", "lag_embed", "read_series",
]
