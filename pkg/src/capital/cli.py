"""Command-line entry point: simulate / fit / baseline / evaluate / benchmark.

Every subcommand takes an explicit --seed and writes a run manifest next to
each output file; re-running the manifest's recorded argv reproduces the
outputs byte for byte.  Exit codes: 0 success, 2 validation error, 3 I/O
error, 4 infeasible threshold.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from importlib import metadata

import click
import numpy as np

from . import baselines as bl
from . import dataset as dsio
from . import evaluation as ev
from . import pipeline as pl
from . import policytree as pt
from .errors import InfeasibleThresholdError, ValidationError
from .forest import ForestParams
from .simulate import ScenarioSpec, gen_survival, gen_trial

__all__ = ["main", "cli"]


def _version() -> str:
    try:
        return metadata.version("capital")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_manifest(out_path: str, argv: list[str], command: str,
                    resolved: dict, seed: int, artifacts: list[str],
                    started: float) -> None:
    doc = {
        "argv": argv,
        "command": command,
        "resolved": resolved,
        "seed": seed,
        "artifacts": artifacts,
        "version": _version(),
        "duration_s": round(time.monotonic() - started, 3),
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _forest_params(trees: int, seed: int) -> ForestParams:
    return ForestParams(num_trees=trees, seed=seed)


@click.group()
def cli():
    """Subgroup selection with average-effect guarantees."""


@cli.command()
@click.option("--scenario", type=click.IntRange(1, 4), required=True)
@click.option("--n", type=click.IntRange(min=2), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--noise", type=click.Choice(["normal", "logistic", "extreme"]),
              default=None, help="Survival noise law (scenario 4 only).")
@click.option("--censor", type=float, default=None,
              help="Target censoring rate (scenario 4 only).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def simulate(ctx, scenario, n, seed, noise, censor, out_path):
    """Draw a synthetic dataset and write it as CSV."""
    started = time.monotonic()
    if scenario == 4:
        spec = ScenarioSpec(id=4, noise=noise, censor_level=censor)
        ds = gen_survival(spec, n, seed)
        dsio.save_survival_csv(ds, out_path)
    else:
        spec = ScenarioSpec(id=scenario, noise=noise, censor_level=censor)
        ds = gen_trial(spec, n, seed)
        dsio.save_trial_csv(ds, out_path)
    _write_manifest(out_path, ctx.obj["argv"], "simulate",
                    {"scenario": scenario, "n": n, "noise": spec.noise,
                     "censor": spec.censor_level},
                    seed, [out_path], started)
    click.echo(f"wrote {n} rows to {out_path}")


def _load_any(path: str, propensity: float):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    if "time" in header:
        return dsio.load_survival_csv(path), True
    return dsio.load_trial_csv(path, propensity=propensity), False


def _audit_doc(result: pl.FitResult) -> dict:
    return {
        "estimator": result.contrast.estimator,
        "delta": result.table.delta,
        "reward_kind": result.rewards.kind,
        "lambda": result.rewards.lam,
        "objective": result.objective,
        "c_hat": [float(v) for v in result.contrast.c_hat],
        "cum_mean": [float(v) for v in result.table.cum_mean],
        "rank": [int(v) for v in result.table.rank],
        "gamma_select": [float(v) for v in result.rewards.gamma_select],
    }


@cli.command()
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--delta", type=float, required=True)
@click.option("--reward", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--depth", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--estimator", type=click.Choice(["rf", "dr", "dr-reg"]), default="rf",
              show_default=True)
@click.option("--rmst", is_flag=True, help="Treat the data as survival CSV.")
@click.option("--propensity", type=float, default=0.5, show_default=True)
@click.option("--trees", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--audit", "audit_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def fit(ctx, data_path, delta, reward, lam, depth, estimator, rmst, propensity,
        trees, seed, out_path, audit_path):
    """Fit the subgroup rule and write the tree as JSON."""
    started = time.monotonic()
    ds, is_survival = _load_any(data_path, propensity)
    if rmst != is_survival:
        raise ValidationError(
            "--rmst must match the data format (survival CSV has a 'time' column)"
        )
    cfg = pl.CapitalConfig(delta=delta, reward_kind=reward, lam=lam, depth=depth,
                           estimator=estimator, forest=_forest_params(trees, seed))
    result = pl.fit_ssr_survival(ds, cfg) if is_survival else pl.fit_ssr(ds, cfg)
    with open(out_path, "w") as fh:
        fh.write(pt.to_json(result.tree))
        fh.write("\n")
    artifacts = [out_path]
    if audit_path:
        doc = _audit_doc(result)
        doc["selected"] = [int(v) for v in result.predict(ds.covariates.values)]
        with open(audit_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        artifacts.append(audit_path)
    _write_manifest(out_path, ctx.obj["argv"], "fit",
                    {"data": data_path, "delta": delta, "reward": reward,
                     "lambda": lam, "depth": depth, "estimator": estimator,
                     "rmst": is_survival, "trees": trees},
                    seed, artifacts, started)
    n_sel = int(result.predict(ds.covariates.values).sum())
    click.echo(f"selected {n_sel}/{ds.n} units (objective {result.objective:.4g})")


@cli.command()
@click.option("--method", type=click.Choice(["vt-a", "vt-c", "adj-y", "adj-c"]),
              required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--delta", type=float, required=True)
@click.option("--depth", type=click.IntRange(min=1), default=2, show_default=True,
              help="Policy-tree depth for the adjusted-value methods.")
@click.option("--vt-depth", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--vt-min-leaf", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--propensity", type=float, default=0.5, show_default=True)
@click.option("--trees", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def baseline(ctx, method, data_path, delta, depth, vt_depth, vt_min_leaf,
             propensity, trees, seed, out_path):
    """Fit a comparison method and write its selection of the input rows."""
    started = time.monotonic()
    ds, is_survival = _load_any(data_path, propensity)
    if is_survival:
        raise ValidationError("baseline methods cover continuous-outcome data only")
    forest = _forest_params(trees, seed)
    if method in ("vt-a", "vt-c"):
        rule = bl.vt_fit(ds, delta, method[-1].upper(), max_depth=vt_depth,
                         min_node_size=vt_min_leaf, forest=forest)
        selected = rule.predict(ds.covariates.values)
        doc = {"method": method, "selected": [int(v) for v in selected]}
        with open(out_path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        kind = "Y" if method == "adj-y" else "C"
        tree = bl.adjusted_value_tree(ds, delta, kind, depth=depth, forest=forest)
        selected = pt.evaluate(tree, ds.covariates.values)
        with open(out_path, "w") as fh:
            fh.write(pt.to_json(tree))
            fh.write("\n")
    _write_manifest(out_path, ctx.obj["argv"], "baseline",
                    {"method": method, "data": data_path, "delta": delta,
                     "depth": depth, "vt_depth": vt_depth,
                     "vt_min_leaf": vt_min_leaf, "trees": trees},
                    seed, [out_path], started)
    click.echo(f"selected {int(selected.sum())}/{ds.n} units")


@cli.command()
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--eta-source", type=click.Choice(["analytic", "mc"]), required=True)
@click.option("--delta", type=float, required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def evaluate(ctx, tree_path, test_path, eta_source, delta, out_path):
    """Score a stored tree on a test CSV carrying true contrasts."""
    started = time.monotonic()
    with open(tree_path) as fh:
        tree = pt.from_json(fh.read())
    ds, _ = _load_any(test_path, propensity=0.5)
    if ds.true_contrast is None:
        raise ValidationError("evaluation needs a c_true column in the test CSV")
    if eta_source == "analytic":
        eta = ev.solve_eta("scenario1", delta)
    else:
        eta = ev.solve_eta(ds.true_contrast, delta)
    metrics = ev.evaluate_rule(tree, ds, eta)
    lines = [
        ("proportion", metrics.proportion),
        ("ate", metrics.ate),
        ("rcd", metrics.rcd),
        ("rpi", metrics.rpi),
    ]
    for name, value in lines:
        click.echo(f"{name}: {'absent' if value is None else format(value, '.4f')}")
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "mean", "sd", "n_reps", "failed"])
            for name, value in lines:
                if value is not None:
                    writer.writerow([name, format(value, ".6g"), 0, 1, 0])
        _write_manifest(out_path, ctx.obj["argv"], "evaluate",
                        {"tree": tree_path, "test": test_path,
                         "eta_source": eta_source, "delta": delta},
                        0, [out_path], started)


@cli.command()
@click.option("--scenario", type=click.IntRange(1, 4), required=True)
@click.option("--n", "n_grid", type=int, multiple=True, required=True)
@click.option("--delta", "delta_grid", type=float, multiple=True, required=True)
@click.option("--reward", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--lambda", "lam_grid", type=float, multiple=True, default=(0.0,),
              show_default=True)
@click.option("--method", type=click.Choice(list(ev._METHODS)), default="capital",
              show_default=True)
@click.option("--estimator", type=click.Choice(["rf", "dr", "dr-reg", "oracle"]),
              default="rf", show_default=True)
@click.option("--depth", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--noise", type=click.Choice(["normal", "logistic", "extreme"]),
              default=None)
@click.option("--censor", type=float, default=None)
@click.option("--reps", type=click.IntRange(min=2), required=True)
@click.option("--test-size", type=click.IntRange(min=10), default=10_000,
              show_default=True)
@click.option("--trees", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--threads", type=int, default=-1, show_default=True,
              help="Worker processes for replicates (-1 = all cores).")
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def benchmark(ctx, scenario, n_grid, delta_grid, reward, lam_grid, method,
              estimator, depth, noise, censor, reps, test_size, trees, threads,
              seed, out_path):
    """Replicated fit-and-evaluate runs; writes an aggregated metric table."""
    started = time.monotonic()
    spec = ScenarioSpec(id=scenario, noise=noise, censor_level=censor)
    cfg = ev.BenchmarkConfig(
        scenario=spec, n_grid=tuple(n_grid), delta_grid=tuple(delta_grid),
        reps=reps, seed=seed, method=method, reward_kind=reward,
        lam_grid=tuple(lam_grid), estimator=estimator, depth=depth,
        test_size=test_size, forest=ForestParams(num_trees=trees, seed=seed),
        n_jobs=threads,
    )
    table = ev.benchmark(cfg)
    ev.write_table_csv(table, out_path)
    _write_manifest(out_path, ctx.obj["argv"], "benchmark",
                    {"scenario": scenario, "n": list(n_grid),
                     "delta": list(delta_grid), "lambda": list(lam_grid),
                     "reward": reward, "method": method, "estimator": estimator,
                     "depth": depth, "reps": reps, "trees": trees},
                    seed, [out_path], started)
    click.echo(f"wrote {len(table.cells)} cell(s) to {out_path}")


def main(argv: list[str] | None = None) -> int:
    """Dispatch a subcommand and map errors to documented exit codes."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cli.main(args=argv, prog_name="capital", standalone_mode=False,
                 obj={"argv": argv})
    except InfeasibleThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.exceptions.Abort:
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
