"""Data containers and CSV ingestion for trial and survival data.

Trial files carry columns ``x1..xr,a,y[,c_true]``; survival files carry
``x1..xr,a,time,event[,c_true]``.  Comma delimited, ``.`` decimal point,
LF line endings, mandatory header.  Floats are written with 17 significant
digits so that save/load round trips are exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

__all__ = [
    "CovariateMatrix",
    "TrialDataset",
    "SurvivalDataset",
    "load_trial_csv",
    "save_trial_csv",
    "load_survival_csv",
    "save_survival_csv",
]


def _as_float_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"covariates must be a 2-d matrix, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class CovariateMatrix:
    """An n-by-r matrix of baseline covariates with unique column names."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_matrix(self.values))
        object.__setattr__(self, "names", tuple(self.names))
        n, r = self.values.shape
        if n < 1 or r < 1:
            raise ValidationError(f"need n >= 1 and r >= 1, got shape ({n}, {r})")
        if len(self.names) != r:
            raise ValidationError(f"{len(self.names)} names for {r} columns")
        if len(set(self.names)) != r:
            raise ValidationError("covariate names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("covariates contain non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]


def _check_common(cov: CovariateMatrix, treatment, name_lens):
    treatment = np.asarray(treatment)
    if treatment.shape != (cov.n,):
        raise ValidationError("treatment must be a length-n vector")
    if not np.isin(treatment, (0, 1)).all():
        raise ValidationError("treatment values must be in {0, 1}")
    if treatment.sum() == 0 or treatment.sum() == cov.n:
        raise ValidationError("both arms non-empty")
    for label, vec in name_lens:
        if np.asarray(vec).shape != (cov.n,):
            raise ValidationError(f"{label} must be a length-n vector")
    return treatment.astype(np.int8)


@dataclass(frozen=True)
class TrialDataset:
    """Randomized-trial data with a continuous outcome.

    ``true_contrast`` is only present for simulated data and carries the
    ground-truth per-unit effect used by oracle evaluation.
    """

    covariates: CovariateMatrix
    treatment: np.ndarray
    outcome: np.ndarray
    propensity: float
    true_contrast: np.ndarray | None = field(default=None)

    def __post_init__(self):
        treatment = _check_common(
            self.covariates, self.treatment, [("outcome", self.outcome)]
        )
        object.__setattr__(self, "treatment", treatment)
        outcome = np.asarray(self.outcome, dtype=float)
        if not np.all(np.isfinite(outcome)):
            raise ValidationError("outcome contains non-finite entries")
        object.__setattr__(self, "outcome", outcome)
        if not 0.0 < float(self.propensity) < 1.0:
            raise ValidationError(f"propensity must lie in (0, 1), got {self.propensity}")
        object.__setattr__(self, "propensity", float(self.propensity))
        if self.true_contrast is not None:
            tc = np.asarray(self.true_contrast, dtype=float)
            if tc.shape != (self.n,):
                raise ValidationError("true_contrast must be a length-n vector")
            object.__setattr__(self, "true_contrast", tc)

    @property
    def n(self) -> int:
        return self.covariates.n

    @property
    def r(self) -> int:
        return self.covariates.r


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored survival data: observed time = min(event, censor time)."""

    covariates: CovariateMatrix
    treatment: np.ndarray
    observed_time: np.ndarray
    event: np.ndarray
    true_contrast: np.ndarray | None = field(default=None)

    def __post_init__(self):
        treatment = _check_common(
            self.covariates,
            self.treatment,
            [("observed_time", self.observed_time), ("event", self.event)],
        )
        object.__setattr__(self, "treatment", treatment)
        times = np.asarray(self.observed_time, dtype=float)
        if not np.all(np.isfinite(times)) or (times < 0).any():
            raise ValidationError("observed_time must be finite and nonnegative")
        object.__setattr__(self, "observed_time", times)
        event = np.asarray(self.event)
        if not np.isin(event, (0, 1)).all():
            raise ValidationError("event indicator must be in {0, 1}")
        event = event.astype(np.int8)
        object.__setattr__(self, "event", event)
        for arm in (0, 1):
            if event[treatment == arm].sum() == 0:
                raise ValidationError(f"arm {arm} has no observed events")
        if self.true_contrast is not None:
            tc = np.asarray(self.true_contrast, dtype=float)
            if tc.shape != (self.n,):
                raise ValidationError("true_contrast must be a length-n vector")
            object.__setattr__(self, "true_contrast", tc)

    @property
    def n(self) -> int:
        return self.covariates.n

    @property
    def r(self) -> int:
        return self.covariates.r


# --- CSV I/O -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file, header row required")
    header, body = rows[0], [row for row in rows[1:] if row]
    return header, body


def _split_header(header: list[str], fixed: list[str], path) -> tuple[list[str], bool]:
    if len(header) != len(set(header)):
        raise SchemaError(f"{path}: duplicate columns in header")
    has_true = header and header[-1] == "c_true"
    cols = header[:-1] if has_true else header
    if len(cols) <= len(fixed) or cols[-len(fixed):] != fixed:
        raise SchemaError(
            f"{path}: expected columns x1..xr,{','.join(fixed)}[,c_true], got {header}"
        )
    x_cols = cols[: -len(fixed)]
    expected = [f"x{i + 1}" for i in range(len(x_cols))]
    if x_cols != expected:
        raise SchemaError(f"{path}: covariate columns must be {expected}, got {x_cols}")
    return x_cols, has_true


def _parse_body(body, width, path) -> np.ndarray:
    data = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise SchemaError(f"{path}: row {i + 2} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError as exc:
                raise ParseError(
                    f"{path}: non-numeric value {cell!r} at row {i + 2}, column {j + 1}"
                ) from exc
    if len(body) == 0:
        raise SchemaError(f"{path}: no data rows")
    return data


def load_trial_csv(path, propensity: float) -> TrialDataset:
    """Load ``x1..xr,a,y[,c_true]`` rows into a :class:`TrialDataset`."""
    header, body = _read_table(path)
    x_cols, has_true = _split_header(header, ["a", "y"], path)
    data = _parse_body(body, len(header), path)
    r = len(x_cols)
    return TrialDataset(
        covariates=CovariateMatrix(data[:, :r], x_cols),
        treatment=data[:, r],
        outcome=data[:, r + 1],
        propensity=propensity,
        true_contrast=data[:, r + 2] if has_true else None,
    )


def load_survival_csv(path) -> SurvivalDataset:
    """Load ``x1..xr,a,time,event[,c_true]`` rows into a :class:`SurvivalDataset`."""
    header, body = _read_table(path)
    x_cols, has_true = _split_header(header, ["a", "time", "event"], path)
    data = _parse_body(body, len(header), path)
    r = len(x_cols)
    return SurvivalDataset(
        covariates=CovariateMatrix(data[:, :r], x_cols),
        treatment=data[:, r],
        observed_time=data[:, r + 1],
        event=data[:, r + 2],
        true_contrast=data[:, r + 3] if has_true else None,
    )


def _write_rows(path, header, columns):
    # OSError propagates so callers can distinguish I/O from validation
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(row) + "\n")


def save_trial_csv(ds: TrialDataset, path) -> None:
    header = [f"x{j + 1}" for j in range(ds.r)] + ["a", "y"]
    cols = [[_fmt(v) for v in ds.covariates.values[:, j]] for j in range(ds.r)]
    cols.append([str(int(a)) for a in ds.treatment])
    cols.append([_fmt(v) for v in ds.outcome])
    if ds.true_contrast is not None:
        header.append("c_true")
        cols.append([_fmt(v) for v in ds.true_contrast])
    _write_rows(path, header, cols)


def save_survival_csv(ds: SurvivalDataset, path) -> None:
    header = [f"x{j + 1}" for j in range(ds.r)] + ["a", "time", "event"]
    cols = [[_fmt(v) for v in ds.covariates.values[:, j]] for j in range(ds.r)]
    cols.append([str(int(a)) for a in ds.treatment])
    cols.append([_fmt(v) for v in ds.observed_time])
    cols.append([str(int(e)) for e in ds.event])
    if ds.true_contrast is not None:
        header.append("c_true")
        cols.append([_fmt(v) for v in ds.true_contrast])
    _write_rows(path, header, cols)
