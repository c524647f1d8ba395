#!/usr/bin/env python3
"""Step-size study for the BLasso approximate path.

Prints the largest coefficient deviation from a conic-solver reference at
five interior lambda values, for a sweep of step sizes, on three problems:
the two-variable hierarchy, a random group-lasso problem and the compiled
ANOVA hierarchy (where the mean hierarchy gap is reported instead).
"""
import argparse

import cvxpy as cp
import numpy as np

from capreg.core import Dataset, Grouping, standardize
from capreg.hierarchy import compile_penalty, hierarchy_gap
from capreg.paths import BlassoConfig, blasso_path
from capreg.simulation import gen_anova

FRACTIONS = (0.8, 0.6, 0.4, 0.2, 0.05)


def reference(d, g, lam):
    b = cp.Variable(d.p)
    norm = lambda v, q: cp.norm(v, "inf" if np.isinf(q) else q)  # noqa: E731
    terms = [w * norm(b[list(idx)], q) for idx, q, w in zip(g.groups, g.group_norms, g.weights)]
    pen = norm(cp.hstack(terms), g.overall_norm)
    cp.Problem(cp.Minimize(0.5 * cp.sum_squares(d.y - d.x @ b) + lam * pen)).solve(solver=cp.CLARABEL)
    return b.value


def deviation(d, g, eps):
    path = blasso_path(d, g, BlassoConfig(eps))
    return max(np.abs(path.coef(f * path.lambda_max) - reference(d, g, f * path.lambda_max)).max() for f in FRACTIONS)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[3e-2, 1e-2, 3e-3, 1e-3])
    args = ap.parse_args()
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 2))
    two = standardize(Dataset(X, X @ [1.5, 0.8] + rng.normal(size=50)))
    X = rng.normal(size=(40, 6))
    glasso = standardize(Dataset(X, X @ [1.0, -0.7, 0.0, 0.0, 0.6, 0.3] + rng.normal(size=40)))
    problems = {
        "two-variable": (two, Grouping(((0, 1), (1,)), 2.0)),
        "group lasso": (glasso, Grouping(((0, 1), (2, 3), (4, 5)), 2.0)),
    }
    print("eps".ljust(10) + "".join(k.rjust(16) for k in problems))
    for eps in args.eps:
        print(f"{eps:<10g}" + "".join(f"{deviation(d, g, eps):16.2e}" for d, g in problems.values()))

    ds, _, graph, _ = gen_anova("moderate", seed=1)
    ds = standardize(ds)
    g = compile_penalty(graph, 2.0, p=ds.p)
    print("\nANOVA (moderate), mean hierarchy gap over recorded iterates")
    for eps in (0.3, 0.1, 0.03, 0.01):
        path = blasso_path(ds, g, BlassoConfig(eps))
        gaps = [hierarchy_gap(np.flatnonzero(bp.beta), graph) for bp in path.breakpoints]
        print(f"eps={eps:<6g} mean {np.mean(gaps):.3f}  max {max(gaps)}")


if __name__ == "__main__":
    main()
