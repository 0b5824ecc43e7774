"""Bagged CART ensembles: regression forests with out-of-bag prediction and
survival forests with log-rank splitting and Kaplan-Meier leaves.

Trees are stored as flat arrays (feature, threshold, child pointers, leaf
value) and grown by compiled kernels.  Each tree draws its bootstrap and its
per-node feature subsets from a stream seeded by (forest seed, tree index),
so fits are bit-identical regardless of how trees are scheduled.

Split candidates are midpoints between consecutive sorted unique feature
values; ties between equally scoring splits go to the lowest feature index,
then the smallest threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import ValidationError

__all__ = [
    "ForestParams",
    "RegressionForest",
    "SurvivalForest",
    "StepCurve",
    "fit_regression_forest",
    "fit_regression_tree",
    "predict",
    "predict_oob",
    "fit_survival_forest",
    "predict_survival_curve",
    "predict_survival_matrix",
]

log = logging.getLogger(__name__)

_NO_DEPTH_LIMIT = 1 << 30


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters shared by both forest flavors.

    ``mtry=None`` and ``min_node_size=None`` resolve to the standard defaults
    at fit time: max(ceil(r/3), 1) features and 5 per leaf for regression,
    ceil(sqrt(r)) features and 15 per leaf for survival.
    """

    num_trees: int = 1000
    mtry: int | None = None
    min_node_size: int | None = None
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValidationError("num_trees must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise ValidationError("mtry must be positive")
        if self.min_node_size is not None and self.min_node_size < 1:
            raise ValidationError("min_node_size must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must fit in 64 unsigned bits")

    def resolved(self, r: int, kind: str) -> "ForestParams":
        mtry = self.mtry
        if mtry is None:
            mtry = max(math.ceil(r / 3), 1) if kind == "regression" else math.ceil(math.sqrt(r))
        if mtry > r:
            raise ValidationError(f"mtry={mtry} exceeds the {r} available features")
        min_node = self.min_node_size
        if min_node is None:
            min_node = 5 if kind == "regression" else 15
        return replace(self, mtry=mtry, min_node_size=min_node)


def _tree_seed(seed: int, tree_index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(tree_index,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class Tree:
    """Flat tree arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf mean (regression) or leaf row index (survival)
    start: np.ndarray  # in-bag segment per node, for audit and leaf membership
    end: np.ndarray
    inbag_order: np.ndarray


@dataclass(frozen=True)
class RegressionForest:
    trees: tuple[Tree, ...]
    inbag: np.ndarray  # (num_trees, n) bootstrap multiplicities
    params: ForestParams
    n: int
    r: int


@dataclass(frozen=True)
class SurvivalForest:
    trees: tuple[Tree, ...]
    leaf_curves: tuple[np.ndarray, ...]  # per tree: (num_nodes, grid) KM values
    time_grid: np.ndarray
    inbag: np.ndarray
    params: ForestParams
    n: int
    r: int


# --- compiled kernels --------------------------------------------------------

@njit(cache=True)
def _grow_reg_tree(X, y, seed, mtry, min_node, max_depth, bootstrap,
                   feat, thr, left, right, value, start_arr, end_arr, inbag):
    n, r = X.shape
    np.random.seed(seed)
    idx = np.empty(n, np.int64)
    if bootstrap:
        for i in range(n):
            j = np.random.randint(0, n)
            idx[i] = j
            inbag[j] += 1
    else:
        for i in range(n):
            idx[i] = i
            inbag[i] += 1
    feat_buf = np.empty(r, np.int64)
    max_nodes = 2 * n + 1
    st_node = np.empty(max_nodes, np.int64)
    st_start = np.empty(max_nodes, np.int64)
    st_end = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)
    sp = 0
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, s, e, depth = st_node[sp], st_start[sp], st_end[sp], st_depth[sp]
        m = e - s
        total = 0.0
        ymin = y[idx[s]]
        ymax = ymin
        for t in range(s, e):
            v = y[idx[t]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        start_arr[node], end_arr[node] = s, e
        value[node] = total / m
        feat[node] = -1
        if m < 2 * min_node or ymin == ymax or depth >= max_depth:
            continue
        for f in range(r):
            feat_buf[f] = f
        for t in range(mtry):
            j = t + np.random.randint(0, r - t)
            tmp = feat_buf[t]
            feat_buf[t] = feat_buf[j]
            feat_buf[j] = tmp
        best_score = -1.0
        best_feat = -1
        best_thr = 0.0
        vals = np.empty(m)
        for c in range(mtry):
            k = feat_buf[c]
            for t in range(m):
                vals[t] = X[idx[s + t], k]
            ordk = np.argsort(vals)
            ps = 0.0
            for t in range(m - 1):
                i_s = ordk[t]
                ps += y[idx[s + i_s]]
                nl = t + 1
                nr = m - nl
                if vals[ordk[t + 1]] > vals[i_s] and nl >= min_node and nr >= min_node:
                    qs = total - ps
                    score = ps * ps / nl + qs * qs / nr
                    cand_thr = 0.5 * (vals[i_s] + vals[ordk[t + 1]])
                    if score > best_score or (
                        score == best_score
                        and (k < best_feat or (k == best_feat and cand_thr < best_thr))
                    ):
                        best_score = score
                        best_feat = k
                        best_thr = cand_thr
        if best_feat < 0:
            continue
        tmp_idx = np.empty(m, np.int64)
        p = 0
        for t in range(s, e):
            if X[idx[t], best_feat] <= best_thr:
                tmp_idx[p] = idx[t]
                p += 1
        mid = p
        for t in range(s, e):
            if X[idx[t], best_feat] > best_thr:
                tmp_idx[p] = idx[t]
                p += 1
        for t in range(m):
            idx[s + t] = tmp_idx[t]
        feat[node] = best_feat
        thr[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = lid, s, s + mid, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rid, s + mid, e, depth + 1
        sp += 1
    return n_nodes, idx


@njit(cache=True)
def _logrank_stat(times, events, in_left, t_ord, m):
    """Standardized two-sample log-rank statistic over a node's members."""
    o_minus_e = 0.0
    var = 0.0
    at_risk = m
    at_risk_left = 0
    for t in range(m):
        if in_left[t_ord[t]]:
            at_risk_left += 1
    t = 0
    while t < m:
        cur = times[t_ord[t]]
        d_tot = 0
        d_left = 0
        g = t
        while g < m and times[t_ord[g]] == cur:
            if events[t_ord[g]] == 1:
                d_tot += 1
                if in_left[t_ord[g]]:
                    d_left += 1
            g += 1
        if d_tot > 0:
            frac = at_risk_left / at_risk
            o_minus_e += d_left - d_tot * frac
            if at_risk > 1:
                var += d_tot * frac * (1.0 - frac) * (at_risk - d_tot) / (at_risk - 1)
        while t < g:
            if in_left[t_ord[t]]:
                at_risk_left -= 1
            at_risk -= 1
            t += 1
    if var <= 0.0:
        return 0.0
    return abs(o_minus_e) / np.sqrt(var)


@njit(cache=True)
def _grow_surv_tree(X, times, events, seed, mtry, min_node, max_depth,
                    feat, thr, left, right, start_arr, end_arr, inbag):
    n, r = X.shape
    np.random.seed(seed)
    idx = np.empty(n, np.int64)
    for i in range(n):
        j = np.random.randint(0, n)
        idx[i] = j
        inbag[j] += 1
    feat_buf = np.empty(r, np.int64)
    max_nodes = 2 * n + 1
    st_node = np.empty(max_nodes, np.int64)
    st_start = np.empty(max_nodes, np.int64)
    st_end = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, s, e, depth = st_node[sp], st_start[sp], st_end[sp], st_depth[sp]
        m = e - s
        start_arr[node], end_arr[node] = s, e
        feat[node] = -1
        n_events = 0
        for t in range(s, e):
            n_events += events[idx[t]]
        if m < 2 * min_node or n_events == 0 or depth >= max_depth:
            continue
        node_times = np.empty(m)
        node_events = np.empty(m, np.int64)
        for t in range(m):
            node_times[t] = times[idx[s + t]]
            node_events[t] = events[idx[s + t]]
        t_ord = np.argsort(node_times)
        for f in range(r):
            feat_buf[f] = f
        for t in range(mtry):
            j = t + np.random.randint(0, r - t)
            tmp = feat_buf[t]
            feat_buf[t] = feat_buf[j]
            feat_buf[j] = tmp
        best_score = 0.0
        best_feat = -1
        best_thr = 0.0
        vals = np.empty(m)
        in_left = np.zeros(m, np.bool_)
        for c in range(mtry):
            k = feat_buf[c]
            for t in range(m):
                vals[t] = X[idx[s + t], k]
            ordk = np.argsort(vals)
            for t in range(m):
                in_left[t] = False
            for t in range(m - 1):
                in_left[ordk[t]] = True
                nl = t + 1
                nr = m - nl
                if vals[ordk[t + 1]] > vals[ordk[t]] and nl >= min_node and nr >= min_node:
                    score = _logrank_stat(node_times, node_events, in_left, t_ord, m)
                    cand_thr = 0.5 * (vals[ordk[t]] + vals[ordk[t + 1]])
                    if score > best_score or (
                        score == best_score
                        and best_feat >= 0
                        and (k < best_feat or (k == best_feat and cand_thr < best_thr))
                    ):
                        best_score = score
                        best_feat = k
                        best_thr = cand_thr
        if best_feat < 0 or best_score <= 0.0:
            continue
        tmp_idx = np.empty(m, np.int64)
        p = 0
        for t in range(s, e):
            if X[idx[t], best_feat] <= best_thr:
                tmp_idx[p] = idx[t]
                p += 1
        mid = p
        for t in range(s, e):
            if X[idx[t], best_feat] > best_thr:
                tmp_idx[p] = idx[t]
                p += 1
        for t in range(m):
            idx[s + t] = tmp_idx[t]
        feat[node] = best_feat
        thr[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = lid, s, s + mid, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rid, s + mid, e, depth + 1
        sp += 1
    return n_nodes, idx


@njit(cache=True)
def _route(X, feat, thr, left, right, out):
    for i in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node


# --- regression forest API ---------------------------------------------------

def _coerce_matrix(X) -> np.ndarray:
    values = getattr(X, "values", X)
    arr = np.ascontiguousarray(np.asarray(values, dtype=float))
    if arr.ndim != 2:
        raise ValidationError("covariates must be a 2-d matrix")
    return arr


def fit_regression_forest(X, y, params: ForestParams | None = None) -> RegressionForest:
    """Grow a bagged CART regression forest, deterministic given (data, seed)."""
    Xv = _coerce_matrix(X)
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    n, r = Xv.shape
    if y.shape != (n,):
        raise ValidationError("y length must match the number of rows")
    params = (params or ForestParams()).resolved(r, "regression")
    if n < 2 * params.min_node_size:
        raise ValidationError(
            f"need n >= {2 * params.min_node_size} samples, got {n}"
        )
    trees = []
    inbag = np.zeros((params.num_trees, n), np.int32)
    max_depth = params.max_depth if params.max_depth is not None else _NO_DEPTH_LIMIT
    cap = 2 * n + 1
    for t in range(params.num_trees):
        feat = np.full(cap, -1, np.int32)
        thr = np.zeros(cap)
        left = np.zeros(cap, np.int32)
        right = np.zeros(cap, np.int32)
        value = np.zeros(cap)
        start = np.zeros(cap, np.int64)
        end = np.zeros(cap, np.int64)
        n_nodes, idx = _grow_reg_tree(
            Xv, y, _tree_seed(params.seed, t), params.mtry, params.min_node_size,
            max_depth, True, feat, thr, left, right, value, start, end, inbag[t],
        )
        trees.append(Tree(
            feature=feat[:n_nodes].copy(), threshold=thr[:n_nodes].copy(),
            left=left[:n_nodes].copy(), right=right[:n_nodes].copy(),
            value=value[:n_nodes].copy(), start=start[:n_nodes].copy(),
            end=end[:n_nodes].copy(), inbag_order=idx,
        ))
    return RegressionForest(trees=tuple(trees), inbag=inbag, params=params, n=n, r=r)


def fit_regression_tree(X, y, max_depth: int, min_node_size: int) -> Tree:
    """A single CART tree on the full sample (no bootstrap, all features).

    Used by leaf-union subgroup rules; leaf membership is recoverable from
    the per-node (start, end) segments over ``inbag_order``.
    """
    Xv = _coerce_matrix(X)
    y = np.ascontiguousarray(np.asarray(y, dtype=float))
    n, r = Xv.shape
    if y.shape != (n,):
        raise ValidationError("y length must match the number of rows")
    cap = 2 * n + 1
    feat = np.full(cap, -1, np.int32)
    thr = np.zeros(cap)
    left = np.zeros(cap, np.int32)
    right = np.zeros(cap, np.int32)
    value = np.zeros(cap)
    start = np.zeros(cap, np.int64)
    end = np.zeros(cap, np.int64)
    inbag = np.zeros(n, np.int32)
    n_nodes, idx = _grow_reg_tree(
        Xv, y, 0, r, min_node_size, max_depth, False,
        feat, thr, left, right, value, start, end, inbag,
    )
    return Tree(
        feature=feat[:n_nodes].copy(), threshold=thr[:n_nodes].copy(),
        left=left[:n_nodes].copy(), right=right[:n_nodes].copy(),
        value=value[:n_nodes].copy(), start=start[:n_nodes].copy(),
        end=end[:n_nodes].copy(), inbag_order=idx,
    )


def _tree_leaf_nodes(tree: Tree, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], np.int64)
    _route(X, tree.feature, tree.threshold, tree.left, tree.right, out)
    return out


def predict(forest: RegressionForest, X) -> np.ndarray:
    """Standard bagged mean over all trees."""
    Xv = _coerce_matrix(X)
    if Xv.shape[1] != forest.r:
        raise ValidationError(f"expected {forest.r} columns, got {Xv.shape[1]}")
    acc = np.zeros(Xv.shape[0])
    for tree in forest.trees:
        acc += tree.value[_tree_leaf_nodes(tree, Xv)]
    return acc / len(forest.trees)


def predict_oob(forest: RegressionForest, X_train,
                return_fallback_count: bool = False):
    """Per-unit mean over trees whose bootstrap excluded the unit.

    ``X_train`` must be the training matrix.  Units in-bag everywhere fall
    back to the full-forest average; the number of such units is logged and
    optionally returned.
    """
    Xv = _coerce_matrix(X_train)
    if Xv.shape != (forest.n, forest.r):
        raise ValidationError("X_train must be exactly the training matrix")
    oob_sum = np.zeros(forest.n)
    oob_cnt = np.zeros(forest.n, np.int64)
    full_sum = np.zeros(forest.n)
    for t, tree in enumerate(forest.trees):
        pred = tree.value[_tree_leaf_nodes(tree, Xv)]
        full_sum += pred
        mask = forest.inbag[t] == 0
        oob_sum[mask] += pred[mask]
        oob_cnt[mask] += 1
    out = np.empty(forest.n)
    covered = oob_cnt > 0
    out[covered] = oob_sum[covered] / oob_cnt[covered]
    fallback = int((~covered).sum())
    if fallback:
        log.warning("predict_oob: %d unit(s) in-bag in every tree, using full-forest average",
                    fallback)
        out[~covered] = full_sum[~covered] / len(forest.trees)
    if return_fallback_count:
        return out, fallback
    return out


# --- survival forest API -----------------------------------------------------

@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function, S(t) = values[k] for times[k] <= t < times[k+1],
    and S(t) = 1 before the first jump."""

    times: np.ndarray
    values: np.ndarray

    def rmst(self, tau: float) -> float:
        return rmst_from_curve(self.times, self.values, tau)


def rmst_from_curve(times: np.ndarray, values: np.ndarray, tau: float) -> float:
    """Exact integral of the step curve from 0 to tau."""
    if tau <= 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    total = min(times[0], tau) if times.size else tau
    for k in range(times.size):
        lo = min(times[k], tau)
        hi = min(times[k + 1], tau) if k + 1 < times.size else tau
        total += values[k] * (hi - lo)
    return float(total)


def _km_curve(times, events, grid) -> np.ndarray:
    """Kaplan-Meier survival evaluated at the grid points."""
    order = np.argsort(times, kind="stable")
    t_sorted = times[order]
    e_sorted = events[order]
    uniq, first = np.unique(t_sorted, return_index=True)
    n = times.size
    surv = np.empty(uniq.size)
    s = 1.0
    for k in range(uniq.size):
        at_risk = n - first[k]
        stop = first[k + 1] if k + 1 < uniq.size else n
        d = int(e_sorted[first[k]:stop].sum())
        if d > 0:
            s *= 1.0 - d / at_risk
        surv[k] = s
    # step values at grid points: last unique time <= grid point
    pos = np.searchsorted(uniq, grid, side="right") - 1
    out = np.ones(grid.size)
    has = pos >= 0
    out[has] = surv[pos[has]]
    return out


def fit_survival_forest(X, observed_time, event, params: ForestParams | None = None) -> SurvivalForest:
    """Grow a survival forest on one arm's data.

    Splits maximize the standardized two-sample log-rank statistic; each leaf
    stores a Kaplan-Meier curve over the arm's event-time grid.
    """
    Xv = _coerce_matrix(X)
    times = np.ascontiguousarray(np.asarray(observed_time, dtype=float))
    events = np.ascontiguousarray(np.asarray(event, dtype=np.int64))
    n, r = Xv.shape
    if times.shape != (n,) or events.shape != (n,):
        raise ValidationError("time/event vectors must match the number of rows")
    if events.sum() == 0:
        raise ValidationError("survival forest needs at least one observed event")
    params = (params or ForestParams()).resolved(r, "survival")
    if n < 2 * params.min_node_size:
        raise ValidationError(f"need n >= {2 * params.min_node_size} samples, got {n}")
    grid = np.unique(times[events == 1])
    max_depth = params.max_depth if params.max_depth is not None else _NO_DEPTH_LIMIT
    cap = 2 * n + 1
    trees = []
    curves = []
    inbag = np.zeros((params.num_trees, n), np.int32)
    for t in range(params.num_trees):
        feat = np.full(cap, -1, np.int32)
        thr = np.zeros(cap)
        left = np.zeros(cap, np.int32)
        right = np.zeros(cap, np.int32)
        start = np.zeros(cap, np.int64)
        end = np.zeros(cap, np.int64)
        n_nodes, idx = _grow_surv_tree(
            Xv, times, events, _tree_seed(params.seed, t), params.mtry,
            params.min_node_size, max_depth, feat, thr, left, right, start, end, inbag[t],
        )
        tree = Tree(
            feature=feat[:n_nodes].copy(), threshold=thr[:n_nodes].copy(),
            left=left[:n_nodes].copy(), right=right[:n_nodes].copy(),
            value=np.zeros(n_nodes), start=start[:n_nodes].copy(),
            end=end[:n_nodes].copy(), inbag_order=idx,
        )
        curve = np.ones((n_nodes, grid.size))
        for node in range(n_nodes):
            if tree.feature[node] == -1:
                members = idx[tree.start[node]:tree.end[node]]
                curve[node] = _km_curve(times[members], events[members], grid)
        trees.append(tree)
        curves.append(curve)
    return SurvivalForest(
        trees=tuple(trees), leaf_curves=tuple(curves), time_grid=grid,
        inbag=inbag, params=params, n=n, r=r,
    )


def predict_survival_matrix(sf: SurvivalForest, X) -> np.ndarray:
    """(n_query, grid) matrix of forest-averaged survival curves."""
    Xv = _coerce_matrix(X)
    if Xv.shape[1] != sf.r:
        raise ValidationError(f"expected {sf.r} columns, got {Xv.shape[1]}")
    acc = np.zeros((Xv.shape[0], sf.time_grid.size))
    for tree, curve in zip(sf.trees, sf.leaf_curves):
        acc += curve[_tree_leaf_nodes(tree, Xv)]
    return acc / len(sf.trees)


def predict_survival_curve(sf: SurvivalForest, x) -> StepCurve:
    """Averaged survival step curve for a single covariate row."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    values = predict_survival_matrix(sf, x)[0]
    return StepCurve(times=sf.time_grid, values=values)
