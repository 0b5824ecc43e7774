"""Oracle cut point, rule metrics, and the Monte-Carlo benchmark harness.

The theoretically optimal rule selects units with true contrast at or above
the cut point eta solving E[C | C >= eta] = delta; the conditional mean is
non-decreasing in the cut, so bisection applies.  Rules are scored on fresh
test draws with ground truth attached: selected proportion, within-subgroup
average effect (ATE), agreement with the oracle rule (RCD), and the fraction
of selected units with positive true effect (RPI).  The benchmark harness
runs seed-derived independent replicates in parallel and aggregates mean and
standard deviation per cell of an (n, delta, lambda) grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import baselines as bl
from . import pipeline as pl
from . import policytree as pt
from .errors import CapitalError, InfeasibleThresholdError, ValidationError
from .forest import ForestParams
from .simulate import ScenarioSpec, gen_survival, gen_trial, true_contrast_sample

__all__ = [
    "EtaOracle",
    "solve_eta",
    "eta_for_scenario",
    "optimal_proportion",
    "Metrics",
    "evaluate_rule",
    "BenchmarkConfig",
    "BenchmarkCell",
    "BenchmarkTable",
    "benchmark",
    "write_table_csv",
]

_ETA_SAMPLE_SIZE = 1_000_000
_ETA_SEED = 777_001


@dataclass(frozen=True)
class EtaOracle:
    """Cut point on the true contrast defining the optimal selection rule."""

    eta: float
    delta: float
    source: str  # "analytic" or "monte_carlo(size, seed)"


def _analytic_eta_scenario1(delta: float) -> float:
    # E[C | C >= t] = (t + 2) / 2 for C ~ Uniform[-2, 2]
    if delta >= 2.0:
        raise InfeasibleThresholdError(
            f"delta={delta} is not attainable by any subgroup (contrast bounded by 2)"
        )
    return 2.0 * delta - 2.0


def solve_eta(c_sample, delta: float) -> EtaOracle:
    """Bisection for eta with E[C | C >= eta] = delta over a contrast sample.

    Pass the string "scenario1" instead of a sample to use the closed form
    for a Uniform[-2, 2] contrast.
    """
    if not np.isfinite(delta):
        raise ValidationError("delta must be finite")
    if isinstance(c_sample, str):
        if c_sample != "scenario1":
            raise ValidationError(f"unknown analytic tag {c_sample!r}")
        return EtaOracle(eta=_analytic_eta_scenario1(delta), delta=float(delta),
                         source="analytic")
    c = np.sort(np.asarray(c_sample, dtype=float))
    if c.ndim != 1 or c.size < 2:
        raise ValidationError("need a contrast sample with at least 2 points")
    if not np.all(np.isfinite(c)):
        raise ValidationError("contrast sample contains non-finite entries")
    prefix = np.concatenate(([0.0], np.cumsum(c)))
    n = c.size

    def cond_mean(t: float) -> float:
        k = int(np.searchsorted(c, t, side="left"))
        if k >= n:
            return float(c[-1])
        return (prefix[n] - prefix[k]) / (n - k)

    if delta > c[-1]:
        raise InfeasibleThresholdError(
            f"delta={delta} exceeds the largest contrast {c[-1]:.4g} in the sample"
        )
    lo = float(c[0]) - 1.0
    hi = float(c[-1])
    if cond_mean(lo) >= delta:
        # constraint already met by selecting everyone
        return EtaOracle(eta=lo, delta=float(delta),
                         source=f"monte_carlo({n}, sample)")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if cond_mean(mid) >= delta:
            hi = mid
        else:
            lo = mid
    return EtaOracle(eta=0.5 * (lo + hi), delta=float(delta),
                     source=f"monte_carlo({n}, sample)")


def eta_for_scenario(spec: ScenarioSpec, delta: float) -> EtaOracle:
    """Cut point for a simulation scenario: closed form where one exists,
    otherwise bisection over a fixed-seed ground-truth sample."""
    if spec.id == 1:
        return solve_eta("scenario1", delta)
    sample = true_contrast_sample(spec, _ETA_SAMPLE_SIZE, _ETA_SEED)
    oracle = solve_eta(sample, delta)
    return EtaOracle(eta=oracle.eta, delta=oracle.delta,
                     source=f"monte_carlo({_ETA_SAMPLE_SIZE}, {_ETA_SEED})")


def optimal_proportion(spec: ScenarioSpec, delta: float) -> float:
    """P(C >= eta): the largest subgroup fraction meeting the constraint."""
    if spec.id == 1:
        _analytic_eta_scenario1(delta)
        return 1.0 - delta / 2.0
    sample = true_contrast_sample(spec, _ETA_SAMPLE_SIZE, _ETA_SEED)
    oracle = solve_eta(sample, delta)
    return float(np.mean(sample >= oracle.eta))


@dataclass(frozen=True)
class Metrics:
    """Rule quality on a test draw; ate and rpi are absent (None) when no
    unit is selected."""

    proportion: float
    ate: float | None
    rcd: float
    rpi: float | None

    def __post_init__(self):
        if not 0.0 <= self.proportion <= 1.0:
            raise ValidationError("proportion out of range")
        if not 0.0 <= self.rcd <= 1.0:
            raise ValidationError("rcd out of range")
        if self.rpi is not None and not 0.0 <= self.rpi <= 1.0:
            raise ValidationError("rpi out of range")
        if (self.proportion == 0.0) != (self.ate is None):
            raise ValidationError("ate must be absent exactly when nothing is selected")


def _decisions(rule, X) -> np.ndarray:
    if isinstance(rule, pt.PolicyTree):
        return pt.evaluate(rule, X)
    if isinstance(rule, pl.FitResult):
        return rule.predict(X)
    if hasattr(rule, "predict"):
        return np.asarray(rule.predict(X), dtype=np.int8)
    raise ValidationError(f"cannot evaluate rule of type {type(rule).__name__}")


def evaluate_rule(rule, test, eta: EtaOracle) -> Metrics:
    """Score a rule against ground truth on a test dataset."""
    if test.true_contrast is None:
        raise ValidationError("evaluation needs a test dataset with true_contrast")
    truth = test.true_contrast
    d = _decisions(rule, test.covariates.values)
    selected = d == 1
    optimal = truth >= eta.eta
    proportion = float(selected.mean())
    return Metrics(
        proportion=proportion,
        ate=float(truth[selected].mean()) if selected.any() else None,
        rcd=float((selected == optimal).mean()),
        rpi=float((truth[selected] > 0).mean()) if selected.any() else None,
    )


# --- benchmark harness -------------------------------------------------------

_METHODS = ("capital", "vt-a", "vt-c", "adj-y", "adj-c")


@dataclass(frozen=True)
class BenchmarkConfig:
    scenario: ScenarioSpec
    n_grid: tuple[int, ...]
    delta_grid: tuple[float, ...]
    reps: int
    seed: int
    method: str = "capital"
    reward_kind: int = 1
    lam_grid: tuple[float, ...] = (0.0,)
    estimator: str = "rf"
    depth: int = 2
    test_size: int = 10_000
    forest: ForestParams = field(default_factory=lambda: ForestParams(num_trees=200))
    n_jobs: int = -1

    def __post_init__(self):
        if self.reps < 2:
            raise ValidationError("need at least 2 replicates")
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {_METHODS}, got {self.method!r}")
        if not self.n_grid or not self.delta_grid or not self.lam_grid:
            raise ValidationError("n_grid, delta_grid and lam_grid must be non-empty")
        if any(n < 10 for n in self.n_grid):
            raise ValidationError("training sizes below 10 are not supported")
        if self.method != "capital" and tuple(self.lam_grid) != (0.0,):
            raise ValidationError("lambda grids apply to the capital method only")


@dataclass(frozen=True)
class BenchmarkCell:
    n: int
    delta: float
    lam: float
    stats: dict  # metric -> (mean, sd, count)
    n_success: int
    failures: tuple[str, ...]


@dataclass(frozen=True)
class BenchmarkTable:
    config: BenchmarkConfig
    cells: tuple[BenchmarkCell, ...]


def _gen(spec: ScenarioSpec, n: int, seed: int):
    if spec.id == 4:
        return gen_survival(spec, n, seed)
    return gen_trial(spec, n, seed)


def _split_features(tree: pt.PolicyTree) -> set[int]:
    feats: set[int] = set()

    def walk(node):
        if isinstance(node, pt.Split):
            feats.add(node.feature)
            walk(node.left)
            walk(node.right)

    walk(tree.root)
    return feats


def _fit_method(cfg: BenchmarkConfig, train, delta: float, lam: float, fit_seed: int):
    forest = ForestParams(
        num_trees=cfg.forest.num_trees, mtry=cfg.forest.mtry,
        min_node_size=cfg.forest.min_node_size, max_depth=cfg.forest.max_depth,
        seed=fit_seed,
    )
    if cfg.method == "capital":
        ccfg = pl.CapitalConfig(
            delta=delta, reward_kind=cfg.reward_kind, lam=lam, depth=cfg.depth,
            estimator=cfg.estimator, forest=forest,
        )
        if cfg.scenario.id == 4:
            return pl.fit_ssr_survival(train, ccfg).tree
        return pl.fit_ssr(train, ccfg).tree
    if cfg.method in ("vt-a", "vt-c"):
        return bl.vt_fit(train, delta, cfg.method[-1].upper(), forest=forest)
    kind = "Y" if cfg.method == "adj-y" else "C"
    return bl.adjusted_value_tree(train, delta, kind, depth=cfg.depth, forest=forest)


def _one_replicate(cfg: BenchmarkConfig, cell_idx: int, rep: int,
                   n: int, delta: float, lam: float, eta: EtaOracle):
    ss = np.random.SeedSequence([int(cfg.seed), cell_idx, rep])
    train_seed, test_seed, fit_seed = (int(s) for s in ss.generate_state(3, np.uint64))
    try:
        train = _gen(cfg.scenario, n, train_seed)
        rule = _fit_method(cfg, train, delta, lam, fit_seed)
        test = _gen(cfg.scenario, cfg.test_size, test_seed)
        metrics = evaluate_rule(rule, test, eta)
    except CapitalError as exc:
        return None, f"rep {rep}: {exc}"
    row = {
        "proportion": metrics.proportion,
        "ate": metrics.ate,
        "rcd": metrics.rcd,
        "rpi": metrics.rpi,
    }
    if isinstance(rule, pt.PolicyTree):
        row["feature_recovery"] = float(_split_features(rule) <= {0, 1})
    return row, None


def _aggregate(rows: list[dict]) -> dict:
    stats = {}
    for metric in rows[0]:
        vals = np.array([r[metric] for r in rows if r[metric] is not None])
        if vals.size == 0:
            continue
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        stats[metric] = (float(vals.mean()), sd, int(vals.size))
    return stats


def benchmark(cfg: BenchmarkConfig) -> BenchmarkTable:
    """Replicated fit-and-evaluate runs over the configured grid.

    Per-replicate errors are recorded on the cell; a cell with fewer than 90%
    successful replicates fails the run.
    """
    grid = [(n, d, lam) for n in cfg.n_grid for d in cfg.delta_grid
            for lam in cfg.lam_grid]
    etas = {d: eta_for_scenario(cfg.scenario, d) for d in cfg.delta_grid}
    jobs = [
        (ci, rep, n, d, lam)
        for ci, (n, d, lam) in enumerate(grid)
        for rep in range(cfg.reps)
    ]
    outcomes = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_one_replicate)(cfg, ci, rep, n, d, lam, etas[d])
        for ci, rep, n, d, lam in jobs
    )
    cells = []
    for ci, (n, d, lam) in enumerate(grid):
        cell_out = [outcomes[k] for k, j in enumerate(jobs) if j[0] == ci]
        rows = [row for row, _err in cell_out if row is not None]
        failures = tuple(err for _row, err in cell_out if err is not None)
        if len(rows) < 0.9 * cfg.reps:
            raise ValidationError(
                f"cell n={n}, delta={d}, lambda={lam}: only {len(rows)}/{cfg.reps} "
                f"replicates succeeded; first failure: {failures[0]}"
            )
        cells.append(BenchmarkCell(n=n, delta=d, lam=lam, stats=_aggregate(rows),
                                   n_success=len(rows), failures=failures))
    return BenchmarkTable(config=cfg, cells=tuple(cells))


def write_table_csv(table: BenchmarkTable, path) -> None:
    """CSV with columns metric,mean,sd,n_reps,failed; multi-cell grids
    qualify the metric name with its cell coordinates."""
    multi = len(table.cells) > 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean", "sd", "n_reps", "failed"])
        for cell in table.cells:
            prefix = (
                f"n={cell.n}/delta={cell.delta:g}/lambda={cell.lam:g}/"
                if multi else ""
            )
            for metric, (mean, sd, count) in cell.stats.items():
                writer.writerow([
                    f"{prefix}{metric}", format(mean, ".6g"), format(sd, ".6g"),
                    count, len(cell.failures),
                ])
