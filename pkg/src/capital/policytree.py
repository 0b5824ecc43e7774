"""Exact search over finite-depth decision trees for select / not-select policies.

A tree routes a unit left when ``x[feature] <= threshold``.  The search
maximizes the total reward of selected units; not selecting always scores 0.
Candidate thresholds are midpoints between consecutive sorted unique feature
values, plus a ``-inf`` sentinel meaning the split routes no unit left (which
is how single-leaf and shallower trees are represented during the search).

Ties between equally scoring trees are broken by preferring the larger
selected set, then the first candidate in (feature, threshold) scan order,
which yields the lexicographically smallest split path.  Depths 1 and 2 run
in compiled kernels; larger depths fall back to plain recursive enumeration
and are only practical for small n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import ValidationError

__all__ = ["Leaf", "Split", "PolicyTree", "search", "evaluate", "to_json", "from_json"]

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class Leaf:
    action: int  # 1 = select, 0 = not-select


@dataclass(frozen=True)
class Split:
    feature: int  # 0-based column index
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"


@dataclass(frozen=True)
class PolicyTree:
    depth: int
    root: Split | Leaf


# --- compiled kernels --------------------------------------------------------
#
# Depth-1 solutions are encoded as 6 floats: value, selected size, feature,
# threshold, left action, right action.  threshold == -inf encodes a single
# leaf taking the right action.

@njit(cache=True)
def _candidate_better(val, size, best_val, best_size):
    if val > best_val:
        return True
    return val == best_val and size > best_size


@njit(cache=True)
def _solve_depth1(X, order, member, gamma, out):
    n, r = X.shape
    total = 0.0
    cnt = 0
    for i in range(n):
        if member[i]:
            total += gamma[i]
            cnt += 1
    # sentinel: empty left side, single right leaf
    act_r = 1 if total >= 0.0 else 0
    best_val = total if total > 0.0 else 0.0
    best_size = cnt if act_r == 1 else 0
    best_feat = 0
    best_thr = _NEG_INF
    best_al = 1
    best_ar = act_r
    for k in range(r):
        p = 0.0
        cleft = 0
        prev_x = 0.0
        started = False
        for t in range(n):
            i = order[t, k]
            if not member[i]:
                continue
            x = X[i, k]
            if started and x > prev_x:
                q = total - p
                al = 1 if p >= 0.0 else 0
                ar = 1 if q >= 0.0 else 0
                val = (p if p > 0.0 else 0.0) + (q if q > 0.0 else 0.0)
                size = (cleft if al == 1 else 0) + (cnt - cleft if ar == 1 else 0)
                if _candidate_better(val, size, best_val, best_size):
                    best_val = val
                    best_size = size
                    best_feat = k
                    best_thr = 0.5 * (prev_x + x)
                    best_al = al
                    best_ar = ar
            p += gamma[i]
            cleft += 1
            prev_x = x
            started = True
    out[0] = best_val
    out[1] = best_size
    out[2] = best_feat
    out[3] = best_thr
    out[4] = best_al
    out[5] = best_ar


@njit(cache=True, parallel=True)
def _solve_depth2(X, order, gamma, res):
    """Best depth-2 tree per root feature; res is (r, 13)."""
    n, r = X.shape
    for j in prange(r):
        member = np.zeros(n, dtype=np.bool_)
        comp = np.ones(n, dtype=np.bool_)
        sol_l = np.empty(6)
        sol_r = np.empty(6)
        # sentinel root: everything goes right, so the tree degenerates to depth 1
        _solve_depth1(X, order, member, gamma, sol_l)
        _solve_depth1(X, order, comp, gamma, sol_r)
        best_val = sol_l[0] + sol_r[0]
        best_size = sol_l[1] + sol_r[1]
        best = np.empty(13)
        best[0] = best_val
        best[1] = best_size
        best[2] = _NEG_INF
        best[3:8] = sol_l[1:6]
        best[8:13] = sol_r[1:6]
        prev_x = 0.0
        started = False
        for t in range(n):
            i = order[t, j]
            x = X[i, j]
            if started and x > prev_x:
                _solve_depth1(X, order, member, gamma, sol_l)
                _solve_depth1(X, order, comp, gamma, sol_r)
                val = sol_l[0] + sol_r[0]
                size = sol_l[1] + sol_r[1]
                if _candidate_better(val, size, best_val, best_size):
                    best_val = val
                    best_size = size
                    best[0] = val
                    best[1] = size
                    best[2] = 0.5 * (prev_x + x)
                    best[3:8] = sol_l[1:6]
                    best[8:13] = sol_r[1:6]
            member[i] = True
            comp[i] = False
            prev_x = x
            started = True
        res[j] = best


# --- python-level assembly ---------------------------------------------------

def _depth1_node(sol) -> Split | Leaf:
    _val, _size, feat, thr, al, ar = sol
    if thr == _NEG_INF:
        return Leaf(int(ar))
    return Split(int(feat), float(thr), Leaf(int(al)), Leaf(int(ar)))


def _coerce_matrix(X) -> np.ndarray:
    values = getattr(X, "values", X)
    return np.ascontiguousarray(np.asarray(values, dtype=float))


def _argsort_columns(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))


def _search_general(X, order, member, gamma, depth):
    """Recursive enumeration for depth >= 3; exponential, small n only."""
    if depth <= 1:
        sol = np.empty(6)
        _solve_depth1(X, order, member, gamma, sol)
        return sol[0], sol[1], _depth1_node(sol)
    n, r = X.shape
    best = _search_general(X, order, member, gamma, depth - 1)
    for j in range(r):
        vals = np.unique(X[member, j]) if member.any() else np.empty(0)
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (lo + hi)
            left_mask = member & (X[:, j] <= thr)
            right_mask = member & ~ (X[:, j] <= thr)
            lv, ls, lnode = _search_general(X, order, left_mask, gamma, depth - 1)
            rv, rs, rnode = _search_general(X, order, right_mask, gamma, depth - 1)
            if _candidate_better(lv + rv, ls + rs, best[0], best[1]):
                best = (lv + rv, ls + rs, Split(j, thr, lnode, rnode))
    return best


def search(X, gamma_select, depth: int = 2) -> tuple[PolicyTree, float]:
    """Find a depth-``depth`` tree maximizing the total selected reward.

    Returns the tree together with its objective, recomputed as the sum of
    ``gamma_select`` over the selected units.
    """
    Xv = _coerce_matrix(X)
    gamma = np.ascontiguousarray(np.asarray(gamma_select, dtype=float))
    if Xv.ndim != 2 or Xv.shape[0] == 0:
        raise ValidationError("search needs a non-empty covariate matrix")
    if gamma.shape != (Xv.shape[0],):
        raise ValidationError("gamma_select length must match the number of rows")
    if not np.all(np.isfinite(gamma)):
        raise ValidationError("gamma_select contains non-finite entries")
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    order = _argsort_columns(Xv)
    if depth == 1:
        sol = np.empty(6)
        _solve_depth1(Xv, order, np.ones(Xv.shape[0], dtype=np.bool_), gamma, sol)
        root = _depth1_node(sol)
    elif depth == 2:
        res = np.empty((Xv.shape[1], 13))
        _solve_depth2(Xv, order, gamma, res)
        best_j = 0
        for j in range(1, Xv.shape[1]):
            if _candidate_better(res[j, 0], res[j, 1], res[best_j, 0], res[best_j, 1]):
                best_j = j
        row = res[best_j]
        if row[2] == _NEG_INF:
            root = _depth1_node(np.concatenate(([row[0]], row[8:13])))
        else:
            root = Split(
                best_j,
                float(row[2]),
                _depth1_node(np.concatenate(([0.0], row[3:8]))),
                _depth1_node(np.concatenate(([0.0], row[8:13]))),
            )
    else:
        member = np.ones(Xv.shape[0], dtype=np.bool_)
        _val, _size, root = _search_general(Xv, order, member, gamma, depth)
    tree = PolicyTree(depth=depth, root=root)
    objective = float(gamma[evaluate(tree, Xv) == 1].sum())
    return tree, objective


def evaluate(tree: PolicyTree, X) -> np.ndarray:
    """Route every row through the tree; returns a {0,1} action vector."""
    Xv = _coerce_matrix(X)
    out = np.empty(Xv.shape[0], dtype=np.int8)

    def walk(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.action
            return
        if node.feature >= Xv.shape[1]:
            raise ValidationError(
                f"tree refers to feature {node.feature + 1} but matrix has {Xv.shape[1]} columns"
            )
        go_left = Xv[idx, node.feature] <= node.threshold
        walk(node.left, idx[go_left])
        walk(node.right, idx[~go_left])

    walk(tree.root, np.arange(Xv.shape[0]))
    return out


# --- serialization -----------------------------------------------------------

def _node_to_dict(node) -> dict:
    if isinstance(node, Leaf):
        return {"action": int(node.action)}
    return {
        "split_var": int(node.feature) + 1,
        "split_value": float(node.threshold),
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc) -> Split | Leaf:
    if not isinstance(doc, dict):
        raise ValidationError(f"malformed tree node: {doc!r}")
    if "action" in doc:
        action = doc["action"]
        if action not in (0, 1):
            raise ValidationError(f"leaf action must be 0 or 1, got {action!r}")
        return Leaf(int(action))
    try:
        return Split(
            int(doc["split_var"]) - 1,
            float(doc["split_value"]),
            _node_from_dict(doc["left"]),
            _node_from_dict(doc["right"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed tree node: {doc!r}") from exc


def to_json(tree: PolicyTree) -> str:
    return json.dumps({"depth": int(tree.depth), "node": _node_to_dict(tree.root)})


def from_json(text: str) -> PolicyTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed tree document: {exc}") from exc
    if not isinstance(doc, dict) or "depth" not in doc or "node" not in doc:
        raise ValidationError("tree document must carry 'depth' and 'node'")
    depth = int(doc["depth"])
    if depth < 1:
        raise ValidationError(f"tree depth must be >= 1, got {depth}")
    root = _node_from_dict(doc["node"])

    def height(node):
        if isinstance(node, Leaf):
            return 0
        return 1 + max(height(node.left), height(node.right))

    if height(root) > depth:
        raise ValidationError("tree is deeper than its declared depth")
    return PolicyTree(depth=depth, root=root)
