"""Procedural multivariate SDE universes and a distributional-forecast
benchmark: sample a system on the complexity curriculum, simulate its
history, branch future ensembles, and score forecasters against the
branching oracle with energy and CRPS metrics."""

from .baselines import (DccParams, Garch11Params, dcc_forecast, dcc_to_dict,
                        fit_dcc, fit_garch11, garch_constant_fallback,
                        historical_simulation)
from .errors import (DegenerateHistory, DimensionMismatch, FitFailed,
                     FormatError, InvalidLevel, InvalidParameter,
                     NonFiniteState, NotPositiveDefinite, SdeverseError)
from .formats import (TrainingRecord, path_matrix_from_ndjson,
                      path_matrix_to_ndjson, read_path_matrix,
                      read_sample_set, read_training_records,
                      sample_set_from_ndjson, sample_set_to_ndjson,
                      write_path_matrix, write_sample_set,
                      write_training_records)
from .harness import (ExperimentConfig, RecoveryResult, config_from_dict,
                      config_to_dict, export_training_stream, run_recovery,
                      score_external)
from .heads import (GmmParams, SkewTParams, gmm_from_dict, gmm_log_density,
                    gmm_sample, gmm_to_dict, skewt_from_dict,
                    skewt_log_density, skewt_sample, skewt_to_dict)
from .linalg import (CholeskyFactor, CorrelationMatrix, cholesky,
                     nearest_pd_repair, sample_correlation)
from .rng import RngStream, derive_stream, sample_standard
from .sampler import sample_system
from .scoring import (ScoreReport, crps_empirical, crps_sum, energy_distance,
                      marginal_energy, score_forecast)
from .simulate import (PathMatrix, SampleSet, branch_futures, em_step,
                       simulate_history)
from .systems import (CurriculumLevel, DiffusionSpec, DriftSpec, JumpSpec,
                      RegimeSpec, SdeSystemSpec, as_level, spec_from_dict,
                      spec_from_json, spec_to_dict, spec_to_json,
                      validate_spec)

__version__ = "0.1.0"

__all__ = [
    "CholeskyFactor", "CorrelationMatrix", "CurriculumLevel", "DccParams",
    "DegenerateHistory", "DiffusionSpec", "DimensionMismatch", "DriftSpec",
    "ExperimentConfig", "FitFailed", "FormatError", "Garch11Params",
    "GmmParams", "InvalidLevel", "InvalidParameter", "JumpSpec",
    "NonFiniteState", "NotPositiveDefinite", "PathMatrix", "RecoveryResult",
    "RegimeSpec", "RngStream", "SampleSet", "ScoreReport", "SdeSystemSpec",
    "SdeverseError", "SkewTParams", "TrainingRecord", "as_level",
    "branch_futures", "cholesky", "config_from_dict", "config_to_dict",
    "crps_empirical", "crps_sum", "dcc_forecast", "dcc_to_dict", "em_step",
    "energy_distance", "export_training_stream", "fit_dcc", "fit_garch11",
    "garch_constant_fallback", "gmm_from_dict", "gmm_log_density",
    "gmm_sample", "gmm_to_dict", "historical_simulation", "marginal_energy",
    "nearest_pd_repair", "path_matrix_from_ndjson", "path_matrix_to_ndjson",
    "read_path_matrix", "read_sample_set", "read_training_records",
    "run_recovery", "sample_correlation", "sample_set_from_ndjson",
    "sample_set_to_ndjson", "sample_standard", "sample_system",
    "score_external", "score_forecast", "simulate_history", "spec_from_dict",
    "spec_from_json", "spec_to_dict", "spec_to_json", "validate_spec",
    "write_path_matrix", "write_sample_set", "write_training_records",
    "derive_stream",
]
