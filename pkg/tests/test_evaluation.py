import numpy as np
import pytest

import capital as cp
from capital import evaluation as ev
from capital import policytree as pt
from capital.errors import InfeasibleThresholdError, ValidationError
from capital.forest import ForestParams


def test_analytic_eta_scenario1():
    for delta, want in ((0.7, -0.6), (1.0, 0.0), (1.3, 0.6)):
        oracle = ev.solve_eta("scenario1", delta)
        assert oracle.eta == pytest.approx(want, abs=1e-12)
        assert oracle.source == "analytic"


def test_bisection_matches_analytic_on_uniform_sample():
    rng = np.random.default_rng(0)
    sample = rng.uniform(-2, 2, 400_000)
    for delta in (0.7, 1.0, 1.3):
        oracle = ev.solve_eta(sample, delta)
        assert oracle.eta == pytest.approx(2 * delta - 2, abs=0.02)
        # defining property on the sample itself
        kept = sample[sample >= oracle.eta]
        assert kept.mean() == pytest.approx(delta, abs=1e-3)


def test_eta_select_all_when_delta_below_mean():
    sample = np.array([1.0, 2.0, 3.0])
    oracle = ev.solve_eta(sample, 1.5)
    assert oracle.eta <= 1.0


def test_eta_infeasible():
    with pytest.raises(InfeasibleThresholdError):
        ev.solve_eta(np.random.default_rng(1).uniform(-2, 2, 1000), 2.1)
    with pytest.raises(InfeasibleThresholdError):
        ev.solve_eta("scenario1", 2.1)


def test_optimal_proportions_match_reference():
    assert ev.optimal_proportion(cp.ScenarioSpec(id=1), 0.7) == pytest.approx(0.65, abs=1e-3)
    assert ev.optimal_proportion(cp.ScenarioSpec(id=1), 1.0) == pytest.approx(0.50, abs=1e-3)
    assert ev.optimal_proportion(cp.ScenarioSpec(id=1), 1.3) == pytest.approx(0.35, abs=1e-3)
    assert ev.optimal_proportion(cp.ScenarioSpec(id=2), 1.0) == pytest.approx(0.50, abs=0.01)
    assert ev.optimal_proportion(cp.ScenarioSpec(id=3), 0.7) == pytest.approx(0.75, abs=0.01)


def test_scaling_c_and_delta_leaves_selection_unchanged():
    rng = np.random.default_rng(2)
    sample = rng.uniform(-2, 2, 200_000)
    for scale in (0.5, 3.0):
        e1 = ev.solve_eta(sample, 1.0)
        e2 = ev.solve_eta(sample * scale, scale)
        assert e2.eta == pytest.approx(scale * e1.eta, abs=0.01)
        # sets agree except within the bisection tolerance band at the cut
        disagree = (sample >= e1.eta) != (sample * scale >= e2.eta)
        band = np.abs(sample - e1.eta) <= 2e-6 / min(scale, 1.0)
        assert np.all(~disagree | band)


def _oracle_rule(eta):
    return pt.PolicyTree(
        depth=1, root=pt.Split(0, eta, pt.Leaf(0), pt.Leaf(1))
    )


def test_oracle_rule_scores_perfect_rcd():
    test = cp.gen_trial(cp.ScenarioSpec(id=1), 5000, seed=3)
    eta = ev.solve_eta("scenario1", 1.0)
    m = ev.evaluate_rule(_oracle_rule(eta.eta), test, eta)
    assert m.rcd == 1.0
    assert m.proportion == pytest.approx(0.5, abs=0.03)
    assert m.ate == pytest.approx(1.0, abs=0.05)


def test_select_none_metrics():
    test = cp.gen_trial(cp.ScenarioSpec(id=1), 2000, seed=4)
    never = pt.PolicyTree(depth=1, root=pt.Leaf(0))
    eta = ev.solve_eta("scenario1", 1.0)
    m = ev.evaluate_rule(never, test, eta)
    assert m.proportion == 0.0
    assert m.ate is None and m.rpi is None
    assert m.rcd == pytest.approx((test.true_contrast < eta.eta).mean())


def test_evaluate_requires_truth():
    ds = cp.gen_trial(cp.ScenarioSpec(id=1), 50, seed=5)
    stripped = cp.TrialDataset(
        covariates=ds.covariates, treatment=ds.treatment, outcome=ds.outcome,
        propensity=0.5,
    )
    with pytest.raises(ValidationError):
        ev.evaluate_rule(pt.PolicyTree(depth=1, root=pt.Leaf(1)), stripped,
                         ev.solve_eta("scenario1", 1.0))


def _tiny_config(**kw):
    base = dict(
        scenario=cp.ScenarioSpec(id=1, r=3), n_grid=(120,), delta_grid=(1.0,),
        reps=3, seed=11, test_size=1500,
        forest=ForestParams(num_trees=25, seed=0), n_jobs=1,
    )
    base.update(kw)
    return ev.BenchmarkConfig(**base)


def test_benchmark_well_formed_and_deterministic(tmp_path):
    t1 = ev.benchmark(_tiny_config())
    t2 = ev.benchmark(_tiny_config())
    assert len(t1.cells) == 1
    cell = t1.cells[0]
    assert cell.n_success == 3
    assert set(cell.stats) >= {"proportion", "rcd", "feature_recovery"}
    assert t1.cells[0].stats == t2.cells[0].stats
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    ev.write_table_csv(t1, p1)
    ev.write_table_csv(t2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_benchmark_worker_count_invariance():
    serial = ev.benchmark(_tiny_config(n_jobs=1))
    parallel = ev.benchmark(_tiny_config(n_jobs=2))
    assert serial.cells[0].stats == parallel.cells[0].stats


def test_benchmark_distinct_replicate_seeds():
    table = ev.benchmark(_tiny_config())
    # distinct seeds make identical metric vectors vanishingly unlikely
    assert table.cells[0].stats["proportion"][1] > 0.0


def test_benchmark_grid_csv_layout(tmp_path):
    table = ev.benchmark(_tiny_config(delta_grid=(0.7, 1.0), reps=2))
    path = tmp_path / "grid.csv"
    ev.write_table_csv(table, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,mean,sd,n_reps,failed"
    assert any(line.startswith("n=120/delta=0.7/lambda=0/proportion") for line in lines)


def test_benchmark_config_validation():
    with pytest.raises(ValidationError):
        _tiny_config(reps=1)
    with pytest.raises(ValidationError):
        _tiny_config(method="vt-a", lam_grid=(0.0, 1.0))
    with pytest.raises(ValidationError):
        _tiny_config(n_grid=())
