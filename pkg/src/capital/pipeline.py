"""End-to-end subgroup selection: contrast -> reward table -> policy tree.

``fit_ssr`` estimates per-unit contrasts, converts the subgroup-average
constraint into per-unit rewards through the ranked cumulative-mean table,
and searches for the decision tree maximizing the total selected reward.
``fit_ssr_survival`` is the same pipeline on restricted-mean survival
contrasts.  ``contrast_bypass`` skips estimation and uses attached ground
truth, which isolates the reward and search layers for testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import contrast as ct
from . import policytree as pt
from . import reward as rw
from .dataset import SurvivalDataset, TrialDataset
from .errors import InfeasibleThresholdError, ValidationError
from .forest import ForestParams

__all__ = ["CapitalConfig", "FitResult", "fit_ssr", "fit_ssr_survival",
           "contrast_bypass"]

_KIND_NAMES = {1: "sign", 2: "value", 3: "penalized"}
_ESTIMATORS = ("rf", "dr", "dr-reg", "oracle")


@dataclass(frozen=True)
class CapitalConfig:
    """Knobs of the full pipeline.

    ``reward_kind``: 1 = sign of the cumulative mean at the unit's rank,
    2 = the cumulative mean itself, 3 = kind 2 plus a ``lam``-weighted
    penalty for units with estimated contrast below ``gamma_floor``.
    """

    delta: float
    reward_kind: int = 1
    lam: float = 0.0
    depth: int = 2
    estimator: str = "rf"
    forest: ForestParams = field(default_factory=ForestParams)
    gamma_floor: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        if self.reward_kind not in (1, 2, 3):
            raise ValidationError(f"reward_kind must be 1, 2 or 3, got {self.reward_kind}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if self.lam > 0 and self.reward_kind != 3:
            raise ValidationError("lambda > 0 requires reward_kind=3")
        if self.depth < 1:
            raise ValidationError(f"depth must be >= 1, got {self.depth}")
        if self.estimator not in _ESTIMATORS:
            raise ValidationError(f"estimator must be one of {_ESTIMATORS}, got {self.estimator!r}")
        if not np.isfinite(self.gamma_floor):
            raise ValidationError("gamma_floor must be finite")

    @property
    def kind_name(self) -> str:
        return _KIND_NAMES[self.reward_kind]


@dataclass(frozen=True)
class FitResult:
    """Every intermediate artifact of one pipeline run, for audit."""

    tree: pt.PolicyTree
    contrast: ct.ContrastEstimate
    table: rw.RewardTable
    rewards: rw.RewardVector
    objective: float

    def predict(self, X) -> np.ndarray:
        return pt.evaluate(self.tree, X)


def _finish(ds, est: ct.ContrastEstimate, cfg: CapitalConfig) -> FitResult:
    c_max = float(est.c_hat.max())
    if cfg.delta > c_max:
        raise InfeasibleThresholdError(
            f"delta={cfg.delta} exceeds the largest estimated contrast {c_max:.4g}; "
            "no subgroup can meet the constraint"
        )
    table = rw.build_reward_table(est.c_hat, cfg.delta)
    rewards = rw.build_rewards(table, cfg.kind_name, cfg.lam, floor=cfg.gamma_floor)
    tree, objective = pt.search(ds.covariates.values, rewards.gamma_select, cfg.depth)
    return FitResult(tree=tree, contrast=est, table=table, rewards=rewards,
                     objective=objective)


def _estimate(ds: TrialDataset, cfg: CapitalConfig) -> ct.ContrastEstimate:
    if cfg.estimator == "rf":
        return ct.estimate_contrast_rf(ds, cfg.forest)
    if cfg.estimator == "dr":
        return ct.estimate_contrast_dr(ds, cfg.forest, regress=False)
    if cfg.estimator == "dr-reg":
        return ct.estimate_contrast_dr(ds, cfg.forest, regress=True)
    return _oracle_estimate(ds)


def _oracle_estimate(ds) -> ct.ContrastEstimate:
    if ds.true_contrast is None:
        raise ValidationError("oracle mode needs a dataset with true_contrast")
    return ct.ContrastEstimate(
        c_hat=ds.true_contrast.copy(), arm0=None, arm1=None, estimator="oracle_true"
    )


def fit_ssr(ds: TrialDataset, cfg: CapitalConfig) -> FitResult:
    """Fit the subgroup selection rule on a continuous-outcome trial."""
    return _finish(ds, _estimate(ds, cfg), cfg)


def fit_ssr_survival(ds: SurvivalDataset, cfg: CapitalConfig) -> FitResult:
    """Fit the rule on survival data via restricted-mean survival contrasts."""
    if cfg.estimator == "oracle":
        return _finish(ds, _oracle_estimate(ds), cfg)
    if cfg.estimator != "rf":
        raise ValidationError("survival data support estimators 'rf' and 'oracle' only")
    est = ct.estimate_rmst_contrast(ds, cfg.forest)
    return _finish(ds, est, cfg)


def contrast_bypass(ds, cfg: CapitalConfig) -> FitResult:
    """Run reward construction and tree search on the attached true contrasts."""
    return _finish(ds, _oracle_estimate(ds), cfg)
