import numpy as np
import pytest

from capital.forest import ForestParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_forest():
    return ForestParams(num_trees=60, seed=7)


def brute_force_policy_value(X, gamma, depth):
    """Independent enumeration of the best depth-limited selection tree.

    Decomposes over root splits (including the no-split case) and scans every
    (feature, midpoint-threshold) candidate per side.  Returns the objective
    recomputed as a single masked sum over the best selected set, so a search
    finding the same set produces the identical float.
    """
    X = np.asarray(X, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    full = np.ones(n, dtype=bool)

    def leaf_pair(mask):
        s = gamma[mask].sum()
        return (s, mask) if s >= 0 else (0.0, np.zeros(n, dtype=bool))

    def thresholds(mask, j):
        u = np.unique(X[mask, j])
        return 0.5 * (u[:-1] + u[1:])

    def best1(mask):
        best_val, best_sel = leaf_pair(mask)
        for j in range(X.shape[1]):
            for thr in thresholds(mask, j):
                go = X[:, j] <= thr
                lv, ls = leaf_pair(mask & go)
                rv, rs = leaf_pair(mask & ~go)
                if lv + rv > best_val:
                    best_val = lv + rv
                    best_sel = ls | rs
        return best_val, best_sel

    best_val, best_sel = best1(full)
    if depth >= 2:
        for j in range(X.shape[1]):
            for thr in thresholds(full, j):
                go = X[:, j] <= thr
                lv, ls = best1(go)
                rv, rs = best1(~go)
                if lv + rv > best_val:
                    best_val = lv + rv
                    best_sel = ls | rs
    return float(gamma[best_sel].sum()), best_sel
