"""Comparison methods: virtual-twins leaf unions and shifted-value trees.

Virtual twins fits per-unit contrast estimates, grows one regression tree of
the estimates on the covariates, and selects a union of its leaves: variant A
keeps leaves whose mean estimate exceeds delta, variant C keeps leaves where
a majority of units have estimates above delta.  The shifted-value tree runs
the exact policy-tree search directly on per-unit values Y - delta or
C_hat - delta instead of the ranked cumulative-mean rewards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forest as rf
from . import policytree as pt
from .contrast import estimate_contrast_rf
from .dataset import TrialDataset
from .errors import ValidationError

__all__ = ["LeafUnionRule", "vt_fit", "adjusted_value_tree"]


@dataclass(frozen=True)
class LeafUnionRule:
    """Subgroup rule selecting every unit routed to one of a set of leaves."""

    tree: rf.Tree
    selected_leaves: frozenset[int]
    variant: str  # A | C

    def predict(self, X) -> np.ndarray:
        values = np.ascontiguousarray(np.asarray(getattr(X, "values", X), dtype=float))
        leaves = rf._tree_leaf_nodes(self.tree, values)
        selected = np.array(sorted(self.selected_leaves), dtype=np.int64)
        return np.isin(leaves, selected).astype(np.int8)


def vt_fit(ds: TrialDataset, delta: float, variant: str,
           max_depth: int = 4, min_node_size: int = 20,
           forest: rf.ForestParams | None = None,
           c_hat=None) -> LeafUnionRule:
    """Virtual-twins rule: contrast estimates, one CART tree, leaf union.

    ``c_hat`` overrides the internal contrast estimation (test seam).
    """
    if variant not in ("A", "C"):
        raise ValidationError(f"variant must be 'A' or 'C', got {variant!r}")
    if not np.isfinite(delta):
        raise ValidationError("delta must be finite")
    if c_hat is None:
        c_hat = estimate_contrast_rf(ds, forest or rf.ForestParams()).c_hat
    else:
        c_hat = np.asarray(c_hat, dtype=float)
        if c_hat.shape != (ds.n,):
            raise ValidationError("c_hat length must match the dataset")
    X = ds.covariates.values
    tree = rf.fit_regression_tree(X, c_hat, max_depth=max_depth,
                                  min_node_size=min_node_size)
    leaves = rf._tree_leaf_nodes(tree, X)
    target = c_hat if variant == "A" else (c_hat > delta).astype(float)
    cut = delta if variant == "A" else 0.5
    selected = {
        int(leaf)
        for leaf in np.unique(leaves)
        if target[leaves == leaf].mean() > cut
    }
    return LeafUnionRule(tree=tree, selected_leaves=frozenset(selected),
                         variant=variant)


def adjusted_value_tree(ds: TrialDataset, delta: float, outcome_kind: str,
                        depth: int = 2,
                        forest: rf.ForestParams | None = None,
                        c_hat=None) -> pt.PolicyTree:
    """Policy tree maximizing the total shifted value over selected units.

    ``outcome_kind`` "Y" uses the observed outcome, "C" the estimated
    contrast; both are shifted by delta before the search.
    """
    if outcome_kind not in ("Y", "C"):
        raise ValidationError(f"outcome_kind must be 'Y' or 'C', got {outcome_kind!r}")
    if not np.isfinite(delta):
        raise ValidationError("delta must be finite")
    if outcome_kind == "Y":
        base = ds.outcome
    elif c_hat is not None:
        base = np.asarray(c_hat, dtype=float)
        if base.shape != (ds.n,):
            raise ValidationError("c_hat length must match the dataset")
    else:
        base = estimate_contrast_rf(ds, forest or rf.ForestParams()).c_hat
    tree, _ = pt.search(ds.covariates.values, base - delta, depth)
    return tree
