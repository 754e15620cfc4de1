"""Marginal ratio off-policy evaluation."""

from ._mrope import (
    ConfigurationError,
    DegenerateWeightsError,
    FitError,
    LoggedDataset,
    OutcomeModel,
    Policy,
    PolicyRatio,
    RatioModel,
    SupportViolationError,
    TabularEnvironment,
    UnsupportedError,
    divergence_check,
    estimate,
    estimator_ids,
    exact_mean,
    exact_variance,
    fit_behavior_policy,
    fit_marginal_ratio,
    fit_outcome_model,
    proposition_gap,
    random_tabular_env,
    run_oracle_suite,
    true_marginal_ratio,
    true_policy_value,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
