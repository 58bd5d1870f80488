"""Multi-objective Bayesian optimisation driven by choice-function feedback.

The package learns a latent vector-valued utility from observed choices
(pick the best options out of a small set), represents it with independent
Gaussian-process priors, and runs preferential multi-objective Bayesian
optimisation on top of the learned posterior.
"""

from choicebo.baselines import OracleGp, OracleGpConfig, fit_oracle_gp
from choicebo.bo import (
    AcquisitionConfig,
    AcquisitionResult,
    BoSession,
    ParetoEstimate,
    QueryPlan,
    SessionStateError,
    acquisition_value,
    apply_choice,
    bo_step,
    build_query,
    create_session,
    estimate_pareto_set,
    optimize_acquisition,
    propose,
    refit,
    session_from_payload,
    session_to_payload,
    submit_choice,
)
from choicebo.benchmarks import (
    BenchmarkProblem,
    ChoiceDataset,
    FoldDataset,
    SplitSpec,
    accuracy,
    evaluate_benchmark,
    generate_choice_dataset,
    get_problem,
    hypervolume,
    ingest_multioutput_csv,
    list_benchmarks,
    load_dataset,
    log_hv_difference,
    save_dataset,
)
from choicebo.domain import (
    ChoiceObservation,
    ConfigError,
    DimensionMismatchError,
    EmptyInputError,
    NumericError,
    ObjectiveMatrix,
    OptionPoint,
    OracleError,
    check_consistency,
    dominates,
    make_option_table,
    non_dominated_mask,
    non_dominated_set,
    simulate_choice,
)
from choicebo.harness import (
    BoRunConfig,
    FitEvalConfig,
    GenerateDataConfig,
    GeneratorSpec,
    SelectDimConfig,
    config_from_payload,
    load_config_file,
    prepare_out_dir,
    resolve_generator,
    run_bo,
    run_fit_eval,
    run_generate_data,
    run_select_dim,
)
from choicebo.inference import (
    FitConfig,
    SurrogatePosterior,
    choice_probability,
    fit_choice_model,
    fit_hyperparameters,
    load_posterior,
    predict_choice,
    predict_latents,
    sample_posterior,
    save_posterior,
)
from choicebo.kernels import InputScaler, KernelParams
from choicebo.likelihood import LikelihoodConfig, choice_log_likelihood
from choicebo.model_selection import (
    LooReport,
    SelectionResult,
    pareto_smooth,
    psis_loo,
    select_latent_dimension,
)

__version__ = "0.1.0"

__all__ = [
    "accuracy",
    "acquisition_value",
    "AcquisitionConfig",
    "AcquisitionResult",
    "apply_choice",
    "BenchmarkProblem",
    "bo_step",
    "BoRunConfig",
    "BoSession",
    "build_query",
    "check_consistency",
    "choice_log_likelihood",
    "choice_probability",
    "ChoiceDataset",
    "ChoiceObservation",
    "config_from_payload",
    "ConfigError",
    "create_session",
    "DimensionMismatchError",
    "dominates",
    "EmptyInputError",
    "estimate_pareto_set",
    "evaluate_benchmark",
    "fit_choice_model",
    "fit_hyperparameters",
    "fit_oracle_gp",
    "FitConfig",
    "FitEvalConfig",
    "FoldDataset",
    "generate_choice_dataset",
    "GenerateDataConfig",
    "GeneratorSpec",
    "get_problem",
    "hypervolume",
    "ingest_multioutput_csv",
    "InputScaler",
    "KernelParams",
    "LikelihoodConfig",
    "list_benchmarks",
    "load_config_file",
    "load_dataset",
    "load_posterior",
    "log_hv_difference",
    "LooReport",
    "make_option_table",
    "non_dominated_mask",
    "non_dominated_set",
    "NumericError",
    "ObjectiveMatrix",
    "optimize_acquisition",
    "OptionPoint",
    "OracleError",
    "OracleGp",
    "OracleGpConfig",
    "pareto_smooth",
    "ParetoEstimate",
    "predict_choice",
    "predict_latents",
    "prepare_out_dir",
    "propose",
    "psis_loo",
    "QueryPlan",
    "refit",
    "resolve_generator",
    "run_bo",
    "run_fit_eval",
    "run_generate_data",
    "run_select_dim",
    "sample_posterior",
    "save_dataset",
    "save_posterior",
    "select_latent_dimension",
    "SelectDimConfig",
    "session_from_payload",
    "session_to_payload",
    "SessionStateError",
    "SelectionResult",
    "simulate_choice",
    "SplitSpec",
    "submit_choice",
    "SurrogatePosterior",
    "__version__",
]
