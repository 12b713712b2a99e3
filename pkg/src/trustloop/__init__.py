"""Trust modeling for multi-robot teams.

Learns a scalar trust function over behavior features from two kinds of
human feedback, trust-level ratings and pairwise preferences, and closes
the loop by synthesizing the next trajectories worth rating.
"""

from ._kernels import available_backends, backend_name
from .ablation import ExperimentReport, RunRecord, run_ablation, run_single, summary_table
from .config import ExperimentConfig, SessionConfig, load_config, save_config
from .datasets import (
    DatasetFormatError,
    LevelDataset,
    LevelRecord,
    PreferenceDataset,
    PreferenceRecord,
    append_level_record,
    append_preference_record,
    load_level_dataset,
    load_preference_dataset,
    load_query_batch,
    save_level_dataset,
    save_preference_dataset,
    save_query_batch,
)
from .model import (
    DEFAULT_DEMARCATIONS,
    DemarcationSet,
    InputScale,
    TrustModel,
    distinction_degree,
    ensure_level,
    ensure_preference_label,
    input_gradient,
    predict_raw,
    preference_prob,
    snap_to_level,
)
from .nn import NetworkSpec, ParamVector, TrainConfig, TrainingError, init_params
from .queries import (
    FeasibleBox,
    QueryConfig,
    TrainingPool,
    pool_similarity,
    query_objective,
    sample_random_queries,
    synthesize_queries,
)
from .rater import Oracle, OracleSpec, true_trust
from .sim import (
    CalibrationError,
    ControlParams,
    HeadingCalibration,
    ScenarioConfig,
    SimulationError,
    Trajectory,
    TrajectoryFormatError,
    default_calibration,
    extract_features,
    formation_error,
    load_trajectory,
    params_for_features,
    save_trajectory,
    simulate,
)
from .stats import Ks2dResult, distinction_histogram, ks2d, pairwise_axis_tests
from .training import (
    EvalReport,
    StlConfig,
    TrainResult,
    evaluate,
    level_loss,
    level_loss_and_gradient,
    preference_loss,
    preference_loss_and_gradient,
    train_level,
    train_preference,
)

__version__ = "0.1.0"

__all__ = [
    "available_backends",
    "backend_name",
    "ExperimentReport",
    "RunRecord",
    "run_ablation",
    "run_single",
    "summary_table",
    "ExperimentConfig",
    "SessionConfig",
    "load_config",
    "save_config",
    "DatasetFormatError",
    "LevelDataset",
    "LevelRecord",
    "PreferenceDataset",
    "PreferenceRecord",
    "append_level_record",
    "append_preference_record",
    "load_level_dataset",
    "load_preference_dataset",
    "load_query_batch",
    "save_level_dataset",
    "save_preference_dataset",
    "save_query_batch",
    "DEFAULT_DEMARCATIONS",
    "DemarcationSet",
    "InputScale",
    "TrustModel",
    "distinction_degree",
    "ensure_level",
    "ensure_preference_label",
    "input_gradient",
    "predict_raw",
    "preference_prob",
    "snap_to_level",
    "NetworkSpec",
    "ParamVector",
    "TrainConfig",
    "TrainingError",
    "init_params",
    "FeasibleBox",
    "QueryConfig",
    "TrainingPool",
    "pool_similarity",
    "query_objective",
    "sample_random_queries",
    "synthesize_queries",
    "Oracle",
    "OracleSpec",
    "true_trust",
    "CalibrationError",
    "ControlParams",
    "HeadingCalibration",
    "ScenarioConfig",
    "SimulationError",
    "Trajectory",
    "TrajectoryFormatError",
    "default_calibration",
    "extract_features",
    "formation_error",
    "load_trajectory",
    "params_for_features",
    "save_trajectory",
    "simulate",
    "Ks2dResult",
    "distinction_histogram",
    "ks2d",
    "pairwise_axis_tests",
    "EvalReport",
    "StlConfig",
    "TrainResult",
    "evaluate",
    "level_loss",
    "level_loss_and_gradient",
    "preference_loss",
    "preference_loss_and_gradient",
    "train_level",
    "train_preference",
    "__version__",
]
