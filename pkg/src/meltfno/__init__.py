"""Surrogate for laser melt-pool temperature fields and geometry.

Learns the map from (power, scan speed) to quasi-steady 3D temperature,
volume-fraction, and liquid-fraction fields with a Fourier neural operator,
and serves predictions at native or super-resolved grid resolution.
"""

from .enthalpy import (MaterialTable, ProcessParams, SamplingPlan, TI64,
                       build_plan, make_params, normalized_enthalpy,
                       speed_from_enthalpy)
from .fields import (Dataset, DatasetManifest, FieldBundle, Grid3,
                     ScalarField3, load_manifest, make_grid, read_bundle,
                     save_manifest, subsample, subsample_bundle, write_bundle)
from .model import (FnoModel, ModelConfig, build_model, default_grid, infer,
                    infer_superresolved, load_checkpoint, model_info,
                    save_checkpoint)
from .oracle import OracleConfig, generate_dataset, generate_sample, \
    oracle_temperature, transient_sequence
from .preprocess import (FieldSequence, NormalizationScales, alpha_mask,
                         liquid_fraction, meltpool_mask,
                         temporal_difference_curve, to_moving_frame,
                         window_average)
from .training import (FoldPlan, OptimState, ReLoBRaLoState, RunConfig,
                       clip_global_norm, evaluate, kfold, lion_step,
                       make_fold_plan, train)
from .estimator import MeltPoolFNO

__version__ = "0.1.0"

__all__ = [
    "MaterialTable", "ProcessParams", "SamplingPlan", "TI64", "build_plan",
    "make_params", "normalized_enthalpy", "speed_from_enthalpy",
    "Dataset", "DatasetManifest", "FieldBundle", "Grid3", "ScalarField3",
    "load_manifest", "make_grid", "read_bundle", "save_manifest", "subsample",
    "subsample_bundle", "write_bundle",
    "FnoModel", "ModelConfig", "build_model", "default_grid", "infer",
    "infer_superresolved", "load_checkpoint", "model_info", "save_checkpoint",
    "OracleConfig", "generate_dataset", "generate_sample",
    "oracle_temperature", "transient_sequence",
    "FieldSequence", "NormalizationScales", "alpha_mask", "liquid_fraction",
    "meltpool_mask", "temporal_difference_curve", "to_moving_frame",
    "window_average",
    "FoldPlan", "OptimState", "ReLoBRaLoState", "RunConfig",
    "clip_global_norm", "evaluate", "kfold", "lion_step", "make_fold_plan",
    "train",
    "MeltPoolFNO",
    "__version__",
]
