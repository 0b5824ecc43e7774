"""Maximum-size treatment-benefit subgroups under an average-effect constraint.

Estimate per-unit treatment-effect contrasts, turn the subgroup-average
constraint into per-unit rewards via ranked cumulative means, and search
decision trees of fixed depth for the largest qualifying subgroup.  Includes
virtual-twins and shifted-value baselines, synthetic data generators, metric
oracles, and a replicated benchmark harness.
"""

from .baselines import LeafUnionRule, adjusted_value_tree, vt_fit
from .contrast import (
    ContrastEstimate,
    compute_tau,
    estimate_contrast_dr,
    estimate_contrast_rf,
    estimate_rmst_contrast,
)
from .dataset import (
    CovariateMatrix,
    SurvivalDataset,
    TrialDataset,
    load_survival_csv,
    load_trial_csv,
    save_survival_csv,
    save_trial_csv,
)
from .errors import (
    CapitalError,
    InfeasibleThresholdError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .evaluation import (
    BenchmarkConfig,
    BenchmarkTable,
    EtaOracle,
    Metrics,
    benchmark,
    eta_for_scenario,
    evaluate_rule,
    optimal_proportion,
    solve_eta,
    write_table_csv,
)
from .forest import (
    ForestParams,
    RegressionForest,
    SurvivalForest,
    fit_regression_forest,
    fit_survival_forest,
)
from .pipeline import CapitalConfig, FitResult, contrast_bypass, fit_ssr, fit_ssr_survival
from .policytree import Leaf, PolicyTree, Split, evaluate, from_json, search, to_json
from .reward import RewardTable, RewardVector, build_reward_table, build_rewards
from .simulate import (
    ScenarioSpec,
    calibrate_c0,
    gen_survival,
    gen_trial,
    true_rmst_contrast,
    truth_tau,
)

__version__ = "0.1.0"

__all__ = [
    "CapitalError", "ValidationError", "SchemaError", "ParseError",
    "InfeasibleThresholdError",
    "CovariateMatrix", "TrialDataset", "SurvivalDataset",
    "load_trial_csv", "save_trial_csv", "load_survival_csv", "save_survival_csv",
    "ForestParams", "RegressionForest", "SurvivalForest",
    "fit_regression_forest", "fit_survival_forest",
    "ContrastEstimate", "estimate_contrast_rf", "estimate_contrast_dr",
    "estimate_rmst_contrast", "compute_tau",
    "RewardTable", "RewardVector", "build_reward_table", "build_rewards",
    "PolicyTree", "Split", "Leaf", "search", "evaluate", "to_json", "from_json",
    "CapitalConfig", "FitResult", "fit_ssr", "fit_ssr_survival", "contrast_bypass",
    "LeafUnionRule", "vt_fit", "adjusted_value_tree",
    "ScenarioSpec", "gen_trial", "gen_survival", "calibrate_c0",
    "true_rmst_contrast", "truth_tau",
    "EtaOracle", "solve_eta", "eta_for_scenario", "optimal_proportion",
    "Metrics", "evaluate_rule",
    "BenchmarkConfig", "BenchmarkTable", "benchmark", "write_table_csv",
]
