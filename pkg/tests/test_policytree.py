import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capital import policytree as pt
from capital.errors import ValidationError

from conftest import brute_force_policy_value


def test_matches_brute_force_on_random_instances(rng):
    for depth in (1, 2):
        for _ in range(30):
            n = int(rng.integers(2, 30))
            r = int(rng.integers(1, 4))
            X = rng.normal(size=(n, r))
            gamma = rng.normal(size=n)
            tree, obj = pt.search(X, gamma, depth=depth)
            brute_val, _sel = brute_force_policy_value(X, gamma, depth)
            assert obj == brute_val


def test_matches_brute_force_with_ties(rng):
    # discrete covariates and repeated reward values exercise tie handling
    for _ in range(20):
        n = int(rng.integers(4, 25))
        X = rng.integers(0, 3, size=(n, 2)).astype(float)
        gamma = rng.choice([-1.0, 0.0, 1.0], size=n)
        tree, obj = pt.search(X, gamma, depth=2)
        brute_val, _sel = brute_force_policy_value(X, gamma, 2)
        assert obj == brute_val


def test_recovers_quadrant_rule():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(400, 4))
    gamma = np.sign(X[:, 0] * X[:, 1])
    tree, obj = pt.search(X, gamma, depth=2)
    assert obj == gamma[gamma > 0].sum()
    d = pt.evaluate(tree, X)
    assert np.array_equal(d == 1, gamma > 0)


def test_all_positive_selects_everyone(rng):
    X = rng.normal(size=(50, 3))
    gamma = np.abs(rng.normal(size=50)) + 0.1
    tree, obj = pt.search(X, gamma, depth=2)
    assert np.all(pt.evaluate(tree, X) == 1)
    assert obj == pytest.approx(gamma.sum())


def test_all_negative_selects_nobody(rng):
    X = rng.normal(size=(50, 3))
    gamma = -np.abs(rng.normal(size=50)) - 0.1
    tree, obj = pt.search(X, gamma, depth=2)
    assert not np.any(pt.evaluate(tree, X) == 1)
    assert obj == 0.0


def test_deeper_trees_never_worse(rng):
    X = rng.normal(size=(60, 2))
    gamma = rng.normal(size=60)
    vals = [pt.search(X, gamma, depth=d)[1] for d in (1, 2, 3)]
    assert vals[0] <= vals[1] <= vals[2]


def test_size_tiebreak_prefers_larger_subgroup():
    # two units with zero reward: selecting them costs nothing, size wins
    X = np.array([[0.0], [1.0], [2.0]])
    gamma = np.array([1.0, 0.0, 0.0])
    tree, obj = pt.search(X, gamma, depth=1)
    assert obj == 1.0
    assert np.all(pt.evaluate(tree, X) == 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.floats(min_value=0.1, max_value=10))
def test_selected_set_invariant_to_gamma_scale(entropy, scale):
    rng = np.random.default_rng(entropy)
    X = rng.normal(size=(25, 2))
    gamma = rng.normal(size=25)
    t1, _ = pt.search(X, gamma, depth=2)
    t2, _ = pt.search(X, gamma * scale, depth=2)
    assert np.array_equal(pt.evaluate(t1, X), pt.evaluate(t2, X))


def test_json_round_trip(rng):
    X = rng.normal(size=(40, 3))
    gamma = rng.normal(size=40)
    tree, _ = pt.search(X, gamma, depth=2)
    again = pt.from_json(pt.to_json(tree))
    assert again == tree
    assert np.array_equal(pt.evaluate(again, X), pt.evaluate(tree, X))


def test_json_uses_one_based_features():
    tree = pt.PolicyTree(depth=1, root=pt.Split(0, 0.5, pt.Leaf(1), pt.Leaf(0)))
    doc = json.loads(pt.to_json(tree))
    assert doc["node"]["split_var"] == 1
    assert doc["depth"] == 1


def test_from_json_rejects_malformed():
    with pytest.raises(ValidationError):
        pt.from_json("not json")
    with pytest.raises(ValidationError):
        pt.from_json(json.dumps({"depth": 1}))
    with pytest.raises(ValidationError):
        pt.from_json(json.dumps({"depth": 1, "node": {"action": 2}}))
    deep = {
        "depth": 1,
        "node": {
            "split_var": 1, "split_value": 0.0,
            "left": {
                "split_var": 2, "split_value": 0.0,
                "left": {"action": 1}, "right": {"action": 0},
            },
            "right": {"action": 0},
        },
    }
    with pytest.raises(ValidationError):
        pt.from_json(json.dumps(deep))


def test_search_input_validation(rng):
    X = rng.normal(size=(10, 2))
    with pytest.raises(ValidationError):
        pt.search(X, np.ones(9), depth=2)
    with pytest.raises(ValidationError):
        pt.search(X, np.full(10, np.nan), depth=2)
    with pytest.raises(ValidationError):
        pt.search(X, np.ones(10), depth=0)


def test_evaluate_rejects_feature_out_of_range():
    tree = pt.PolicyTree(depth=1, root=pt.Split(5, 0.0, pt.Leaf(1), pt.Leaf(0)))
    with pytest.raises(ValidationError):
        pt.evaluate(tree, np.zeros((3, 2)))
