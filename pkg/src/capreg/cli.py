"""Command-line front end.

Lambda is on the half-RSS scale everywhere: the fitted objective is
``0.5 * ||y - X beta||^2 + lambda * T(beta)`` on standardized predictors.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .clustering import correlation_distance, pam_cluster
from .core import Dataset, Grouping, load_dataset, parse_norm, read_matrix_csv, standardize, write_matrix_csv
from .errors import CapError, ConfigError, DataError, SolverError
from .hierarchy import HierarchyGraph, compile_penalty
from .paths.blasso import BlassoConfig
from .paths.dispatch import SOLVERS, fit_path
from .selection import aicc, cross_validate
from .simulation import ExperimentSpec, run_experiment

LAMBDA_NOTE = "Lambda multiplies the penalty in 0.5*RSS + lambda*T(beta), with standardized predictors."


_OWNER = {
    "core_model": (
        "DimensionMismatch", "ConstantColumn", "NonFiniteData", "IndexOutOfRange",
        "InvalidNorm", "NormMismatch", "InvalidGrouping", "InvalidShape",
    ),
    "hierarchy": ("CyclicGraph", "NotATree", "UnknownIndex"),
    "path_exact": ("OverlappingGroups", "WrongNorms", "DegenerateDesign"),
    "path_blasso": ("NonConvexNorms", "StepBudgetExceeded"),
    "model_selection": ("UnsupportedSolver", "EmptyCandidateSet", "FoldTooSmall", "SchemeUnavailable"),
    "grouping_estimation": ("InvalidK",),
    "simulation": ("NotPSD",),
}


def _module_of(exc: CapError) -> str:
    name = type(exc).__name__
    return next((m for m, names in _OWNER.items() if name in names), "cli")


def _fail(exc: CapError):
    err = {"error": type(exc).__name__, "module": _module_of(exc), "category": next(c.__name__ for c in (ConfigError, DataError, SolverError, CapError) if isinstance(exc, c)), "message": str(exc)}
    click.echo(json.dumps(err), err=True)
    sys.exit(exc.exit_code)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except CapError as exc:
            _fail(exc)


def _structure(solver, groups, hierarchy, p):
    if solver == "hicap":
        if hierarchy is None:
            raise ConfigError("field 'hierarchy': hicap needs --hierarchy")
        graph, _, weights = HierarchyGraph.from_json(hierarchy)
        return graph, {"weights": weights}
    if hierarchy is not None:
        graph, gamma, weights = HierarchyGraph.from_json(hierarchy)
        return compile_penalty(graph, gamma, weights, p=p), {}
    if groups is not None:
        return Grouping.from_json(groups, p=p), {}
    if solver in ("icap", "blasso"):
        raise ConfigError(f"field 'groups': {solver} needs --groups or --hierarchy")
    return None, {}


def _prepare(x, y, solver, groups, hierarchy, allow_dag, step_size):
    data = standardize(load_dataset(x, y))
    structure, kw = _structure(solver, groups, hierarchy, data.p)
    if solver == "hicap":
        kw["allow_dag"] = allow_dag
    if solver == "blasso":
        kw["config"] = BlassoConfig(step_size)
    return data, structure, kw


def _data_options(f):
    opts = [
        click.option("--x", "x", required=True, type=click.Path(exists=True, dir_okay=False), help="Predictor matrix CSV."),
        click.option("--y", "y", required=True, type=click.Path(exists=True, dir_okay=False), help="Response CSV (one column)."),
        click.option("--solver", type=click.Choice(SOLVERS), default="lasso", show_default=True),
        click.option("--groups", type=click.Path(exists=True, dir_okay=False), help="Grouping JSON."),
        click.option("--hierarchy", type=click.Path(exists=True, dir_okay=False), help="Hierarchy JSON."),
        click.option("--allow-dag", is_flag=True, help="Let hicap run on a non-tree DAG."),
        click.option("--step-size", type=float, default=None, help="BLasso step size (default scales with ||X'y||)."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group(cls=_Group, help="Composite absolute penalty regression.\n\n" + LAMBDA_NOTE)
def main():
    pass


@main.command(help="Trace a regularization path and write it as JSON.\n\n" + LAMBDA_NOTE)
@_data_options
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def path(x, y, solver, groups, hierarchy, allow_dag, step_size, out):
    data, structure, kw = _prepare(x, y, solver, groups, hierarchy, allow_dag, step_size)
    fit_path(data, solver, structure, **kw).to_json(out)


@main.command(help="Coefficients at one lambda, standardized and in original units.\n\n" + LAMBDA_NOTE)
@_data_options
@click.option("--lambda", "lam", required=True, type=float)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def fit(x, y, solver, groups, hierarchy, allow_dag, step_size, lam, out):
    if lam < 0:
        raise ConfigError("field 'lambda' must be nonnegative")
    data, structure, kw = _prepare(x, y, solver, groups, hierarchy, allow_dag, step_size)
    beta = fit_path(data, solver, structure, **kw).coef(lam)
    intercept, raw = data.coef_to_original(beta)
    doc = {"lambda": lam, "solver": solver, "beta": beta.tolist(), "intercept": intercept, "beta_original": raw.tolist()}
    Path(out).write_text(json.dumps(doc, indent=1))


@main.command(help="Choose lambda by AIC_C or cross-validation.\n\n" + LAMBDA_NOTE)
@_data_options
@click.option("--method", type=click.Choice(["aicc", "cv"]), default="aicc", show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--scheme", type=click.Choice(["random", "balanced"]), default="random", show_default=True)
@click.option("--seed", type=int, default=None, help="Required for --method cv.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--curve", type=click.Path(dir_okay=False), help="Write lambda,criterion,df as CSV.")
def select(x, y, solver, groups, hierarchy, allow_dag, step_size, method, folds, scheme, seed, out, curve):
    data, structure, kw = _prepare(x, y, solver, groups, hierarchy, allow_dag, step_size)
    if method == "aicc":
        res = aicc(fit_path(data, solver, structure, **kw), data)
    else:
        if seed is None:
            raise ConfigError("field 'seed': cross-validation needs --seed")
        res = cross_validate(data, structure, solver, folds, scheme, seed, **kw)
    intercept, raw = data.coef_to_original(res.beta)
    doc = {
        "criterion_name": res.criterion_name,
        "chosen_lambda": res.chosen_lambda,
        "df_at_chosen": res.df_at_chosen,
        "lambdas": res.lambdas.tolist(),
        "criterion_values": res.criterion_values.tolist(),
        "beta": res.beta.tolist(),
        "intercept": intercept,
        "beta_original": raw.tolist(),
    }
    Path(out).write_text(json.dumps(doc, indent=1))
    if curve:
        write_matrix_csv(curve, np.array(res.curve_rows()).reshape(-1, 3), header=["lambda", "criterion", "df"])


@main.command(help="Group predictors by PAM on 1 - |corr| and write grouping JSON.")
@click.option("--x", "x", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", "k", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--norm", default="inf", show_default=True, help="Within-group norm recorded in the output.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cluster(x, k, seed, norm, out):
    X = read_matrix_csv(x)
    data = standardize(Dataset(X, np.zeros(X.shape[0])))
    res = pam_cluster(correlation_distance(data), k, seed=seed)
    res.grouping(norm=parse_norm(norm)).to_json(out)


@main.command("hierarchy-compile", help="Compile a hierarchy JSON into an overlapping grouping.")
@click.option("--hierarchy", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p", type=int, default=None, help="Number of predictors (default: largest index + 1).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def hierarchy_compile(hierarchy, p, out):
    graph, gamma, weights = HierarchyGraph.from_json(hierarchy)
    compile_penalty(graph, gamma, weights, p=p).to_json(out)


@main.command(help="Run a simulation study from a spec JSON.\n\n" + LAMBDA_NOTE)
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", required=True, type=int, help="Overrides the spec's seed.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for replications.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--summary", type=click.Path(dir_okay=False), help="Write arm,metric,mean,se as CSV.")
def simulate(spec_path, seed, jobs, out, summary):
    try:
        data = json.loads(Path(spec_path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec file is not valid JSON: {exc}") from exc
    try:
        spec = ExperimentSpec.from_dict({**data, "seed": seed})
    except TypeError as exc:
        raise ConfigError(f"spec has an unknown field: {exc}") from exc
    report = run_experiment(spec, jobs=jobs)
    report.to_json(out)
    if summary:
        lines = ["arm,metric,mean,se"] + [f"{a},{m},{mean:.17g},{se:.17g}" for a, m, mean, se in report.summary_rows()]
        Path(summary).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
