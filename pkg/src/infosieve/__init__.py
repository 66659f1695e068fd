"""Linear information sieve: incremental extraction of common information.

Each layer learns one linear factor that explains as much of the total
correlation among its inputs as it can, replaces the inputs by their
remainder given the factor, and passes the result to the next layer.
"""
from .data import DataMatrix, PreprocSpec, center, gaussianize_rank, load_csv, preprocess, save_csv
from .estimator import InformationSieve
from .evaluation import (
    ScoreReport,
    pca_components,
    run_benchmark,
    score_recovery,
    trace_convergence,
)
from .exceptions import (
    DegenerateColumn,
    DomainError,
    InputError,
    NumericalBlowup,
    NumericalError,
    ParseError,
    SchemaError,
    ShapeError,
    SieveError,
    SingularCovariance,
)
from .layer import FitConfig, LayerParams, fit_layer, fixed_point_step, invert_layer, layer_objective, remainder
from .metrics import capacity_to_noise, gaussian_tc, pairwise_mi
from .model import SieveModel, StopRule, fit_sieve, inverse, load_model, reconstruct, save_model, transform
from .synth import GenSpec, SynthDataset, generate

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "DegenerateColumn",
    "DomainError",
    "FitConfig",
    "GenSpec",
    "InformationSieve",
    "InputError",
    "LayerParams",
    "NumericalBlowup",
    "NumericalError",
    "ParseError",
    "PreprocSpec",
    "SchemaError",
    "ScoreReport",
    "ShapeError",
    "SieveError",
    "SieveModel",
    "SingularCovariance",
    "StopRule",
    "SynthDataset",
    "capacity_to_noise",
    "center",
    "fit_layer",
    "fit_sieve",
    "fixed_point_step",
    "gaussian_tc",
    "gaussianize_rank",
    "generate",
    "inverse",
    "invert_layer",
    "layer_objective",
    "load_csv",
    "load_model",
    "pairwise_mi",
    "pca_components",
    "preprocess",
    "reconstruct",
    "remainder",
    "run_benchmark",
    "save_csv",
    "save_model",
    "score_recovery",
    "trace_convergence",
    "transform",
]
