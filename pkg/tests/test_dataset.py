import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import capital as cp
from capital.errors import ParseError, SchemaError, ValidationError


def _trial(n=6, r=2, with_truth=False):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(n, r))
    return cp.TrialDataset(
        covariates=cp.CovariateMatrix(x, [f"x{j+1}" for j in range(r)]),
        treatment=np.arange(n) % 2,
        outcome=rng.normal(size=n),
        propensity=0.5,
        true_contrast=x[:, 0] if with_truth else None,
    )


def test_trial_round_trip(tmp_path):
    ds = _trial(with_truth=True)
    path = tmp_path / "d.csv"
    cp.save_trial_csv(ds, path)
    back = cp.load_trial_csv(path, propensity=0.5)
    assert np.array_equal(back.covariates.values, ds.covariates.values)
    assert np.array_equal(back.treatment, ds.treatment)
    assert np.array_equal(back.outcome, ds.outcome)
    assert np.array_equal(back.true_contrast, ds.true_contrast)


def test_trial_round_trip_without_truth(tmp_path):
    ds = _trial()
    path = tmp_path / "d.csv"
    cp.save_trial_csv(ds, path)
    back = cp.load_trial_csv(path, propensity=0.3)
    assert back.true_contrast is None
    assert back.propensity == 0.3


def test_survival_round_trip(tmp_path):
    spec = cp.ScenarioSpec(id=4)
    ds = cp.gen_survival(spec, 30, seed=1)
    path = tmp_path / "s.csv"
    cp.save_survival_csv(ds, path)
    back = cp.load_survival_csv(path)
    assert np.array_equal(back.observed_time, ds.observed_time)
    assert np.array_equal(back.event, ds.event)
    assert np.array_equal(back.true_contrast, ds.true_contrast)


@settings(max_examples=25, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_seventeen_digit_floats_round_trip(value):
    assert float(format(value, ".17g")) == value


def test_schema_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,y,a\n1,2,3,0\n")
    with pytest.raises(SchemaError):
        cp.load_trial_csv(bad, propensity=0.5)
    bad.write_text("")
    with pytest.raises(SchemaError):
        cp.load_trial_csv(bad, propensity=0.5)
    bad.write_text("x1,a,y\n")
    with pytest.raises(SchemaError):
        cp.load_trial_csv(bad, propensity=0.5)
    bad.write_text("x1,a,y\n1,0,2\n1,1\n")
    with pytest.raises(SchemaError) as err:
        cp.load_trial_csv(bad, propensity=0.5)
    assert "row 3" in str(err.value)


def test_parse_error_reports_position(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,a,y\n1,0,2\noops,1,3\n")
    with pytest.raises(ParseError) as err:
        cp.load_trial_csv(bad, propensity=0.5)
    assert "row 3" in str(err.value)
    assert "column 1" in str(err.value)


def test_dataset_invariants():
    x = np.zeros((4, 2))
    cov = cp.CovariateMatrix(x, ["x1", "x2"])
    with pytest.raises(ValidationError):
        cp.CovariateMatrix(x, ["x1", "x1"])
    with pytest.raises(ValidationError):
        cp.CovariateMatrix(np.full((2, 2), np.nan), ["x1", "x2"])
    with pytest.raises(ValidationError):
        cp.TrialDataset(cov, np.array([1, 1, 1, 1]), np.zeros(4), 0.5)
    with pytest.raises(ValidationError):
        cp.TrialDataset(cov, np.array([0, 1, 0, 2]), np.zeros(4), 0.5)
    with pytest.raises(ValidationError):
        cp.TrialDataset(cov, np.array([0, 1, 0, 1]), np.zeros(4), 1.5)
    with pytest.raises(ValidationError):
        cp.TrialDataset(cov, np.array([0, 1, 0, 1]), np.array([1, 2, np.inf, 3]), 0.5)


def test_survival_needs_events_per_arm():
    x = np.zeros((4, 1))
    cov = cp.CovariateMatrix(x, ["x1"])
    with pytest.raises(ValidationError):
        cp.SurvivalDataset(cov, np.array([0, 1, 0, 1]),
                           np.ones(4), np.array([1, 0, 1, 0]))
    ds = cp.SurvivalDataset(cov, np.array([0, 1, 0, 1]),
                            np.ones(4), np.array([1, 1, 0, 0]))
    assert ds.n == 4
