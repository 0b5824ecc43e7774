"""Ranked cumulative-mean table and per-unit reward vectors.

The population-level constraint "subgroup average effect >= delta" is turned
into unit-level rewards: shift the contrast estimates by delta, sort them
descending, take running means, and hand each unit the running mean at its
own rank (optionally signed, or penalized for negative estimated effects).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contrast import ContrastEstimate
from .errors import ValidationError

__all__ = ["RewardTable", "RewardVector", "build_reward_table", "build_rewards",
           "build_survival_reward_table"]


@dataclass(frozen=True)
class RewardTable:
    """Descending sort of ``c_hat - delta`` with cumulative means and ranks.

    ``rank`` is 1-based: ``rank[i]`` is the position of unit i in the
    descending sequence, ties broken by original index (stable sort).
    """

    delta: float
    order: np.ndarray
    r_sorted: np.ndarray
    cum_mean: np.ndarray
    rank: np.ndarray
    c_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.c_hat.shape[0]


@dataclass(frozen=True)
class RewardVector:
    kind: str  # sign | value | penalized
    lam: float
    gamma_select: np.ndarray


def build_reward_table(c_hat, delta: float) -> RewardTable:
    """Sort ``c_hat - delta`` descending and compute running means and ranks."""
    c_hat = np.asarray(c_hat, dtype=float)
    if c_hat.ndim != 1 or c_hat.size < 1:
        raise ValidationError("c_hat must be a non-empty vector")
    if not np.all(np.isfinite(c_hat)):
        raise ValidationError("c_hat contains non-finite entries")
    if not np.isfinite(delta):
        raise ValidationError("delta must be finite")
    r = c_hat - delta
    order = np.argsort(-r, kind="stable")
    r_sorted = r[order]
    n = r.size
    cum_mean = np.cumsum(r_sorted) / np.arange(1, n + 1)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(1, n + 1)
    return RewardTable(
        delta=float(delta),
        order=order,
        r_sorted=r_sorted,
        cum_mean=cum_mean,
        rank=rank,
        c_hat=c_hat,
    )


def build_survival_reward_table(est: ContrastEstimate, delta: float) -> RewardTable:
    """Same machinery on an estimated difference of restricted mean survival times."""
    if est.estimator != "rmst_forest":
        raise ValidationError(
            f"expected an RMST contrast estimate, got estimator={est.estimator!r}"
        )
    return build_reward_table(est.c_hat, delta)


def build_rewards(table: RewardTable, kind: str, lam: float = 0.0,
                  floor: float = 0.0) -> RewardVector:
    """Per-unit select rewards; the not-select action always scores 0.

    kind="sign": sign of the cumulative mean at the unit's rank.
    kind="value": the cumulative mean itself.
    kind="penalized": the value reward plus ``lam * c_hat`` for units whose
    estimated contrast falls below ``floor`` (the minimum beneficial effect,
    0 by default).
    """
    if kind not in ("sign", "value", "penalized"):
        raise ValidationError(f"unknown reward kind {kind!r}")
    if not np.isfinite(floor):
        raise ValidationError("floor must be finite")
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    if lam > 0 and kind != "penalized":
        raise ValidationError("lambda > 0 requires kind='penalized'")
    at_rank = table.cum_mean[table.rank - 1]
    if kind == "sign":
        gamma = np.sign(at_rank)
    elif kind == "value":
        gamma = at_rank.copy()
    else:
        gamma = at_rank + lam * np.where(table.c_hat < floor, table.c_hat, 0.0)
    return RewardVector(kind=kind, lam=float(lam), gamma_select=gamma)
