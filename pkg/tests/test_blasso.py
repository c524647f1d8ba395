import math

import numpy as np
import pytest

from capreg.core import Dataset, Grouping, standardize
from capreg.errors import ConfigError, NonConvexNorms, StepBudgetExceeded
from capreg.paths import BlassoConfig, blasso_path, lasso_path

from conftest import cvx_minimizer, orthonormal_dataset

FRACTIONS = (0.8, 0.6, 0.4, 0.2, 0.05)


@pytest.fixture(scope="module")
def lasso_problem():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 5))
    y = X @ np.array([2.0, -1.0, 0.0, 0.0, 0.5]) + rng.normal(size=30)
    return standardize(Dataset(X, y))


def group_soft(z, lam):
    nz = np.linalg.norm(z)
    return max(0.0, 1.0 - lam / nz) * z


def test_default_step_size(lasso_problem):
    cfg = BlassoConfig().resolve(lasso_problem)
    d = lasso_problem
    assert cfg.step_size == pytest.approx(1e-2 * np.abs(d.x.T @ d.y).max() / d.n)


@pytest.mark.parametrize("kw", [{"step_size": 0.0}, {"backward_tolerance": -1.0}, {"max_steps": 0}, {"lambda_floor": -0.1}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        BlassoConfig(**kw)


def test_lasso_penalty_tracks_exact_path(lasso_problem):
    d = lasso_problem
    exact = lasso_path(d)
    eps = 1e-3
    b = blasso_path(d, Grouping.singletons(d.p, 1.0), BlassoConfig(eps))
    dev = max(np.abs(bp.beta - exact.coef(bp.lam)).max() for bp in b.breakpoints)
    assert dev <= 5 * eps
    assert b.approximate and b.solver == "blasso"
    assert np.all(np.diff(b.lambdas) <= 0)


def test_orthonormal_group_soft_threshold():
    z = np.array([3.0, -1.0, 0.5, 2.0])
    d = orthonormal_dataset(z, n=12)
    eps = 1e-3
    b = blasso_path(d, Grouping.single(4, 2.0), BlassoConfig(eps))
    lam0 = b.lambda_max
    for f in FRACTIONS:
        lam = f * lam0
        assert np.abs(b.coef(lam) - group_soft(z, lam)).max() <= 5 * eps


def test_smaller_step_is_no_worse():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(25, 4))
    d = standardize(Dataset(X, X @ [1.0, 0.5, -0.5, 0.0] + rng.normal(size=25)))
    g = Grouping(((0, 1), (2, 3)), 2.0)
    devs = []
    for eps in (1e-2, 1e-3):
        b = blasso_path(d, g, BlassoConfig(eps))
        lams = [f * b.lambda_max for f in FRACTIONS]
        devs.append(max(np.abs(b.coef(lam) - cvx_minimizer(d, g, lam)).max() for lam in lams))
    assert devs[1] <= devs[0]
    assert devs[1] <= 5e-3


def test_config_echo(lasso_problem):
    b = blasso_path(lasso_problem, Grouping.single(lasso_problem.p, 2.0), BlassoConfig(1e-2))
    assert b.config["step_size"] == 1e-2
    assert b.config["group_norms"] == [2.0]


def test_non_convex_norms_rejected(lasso_problem):
    with pytest.raises(NonConvexNorms):
        blasso_path(lasso_problem, Grouping.singletons(lasso_problem.p, 0.5))


def test_step_budget(lasso_problem):
    with pytest.raises(StepBudgetExceeded):
        blasso_path(lasso_problem, Grouping.singletons(lasso_problem.p, 1.0), BlassoConfig(1e-4, max_steps=10))


def test_lambda_floor_stops_early(lasso_problem):
    d = lasso_problem
    full = blasso_path(d, Grouping.singletons(d.p, 1.0), BlassoConfig(1e-2))
    cut = blasso_path(d, Grouping.singletons(d.p, 1.0), BlassoConfig(1e-2, lambda_floor=0.5 * full.lambda_max))
    assert len(cut) < len(full)
    assert cut.lambdas[-2] >= 0.5 * full.lambda_max


def test_zero_response():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = blasso_path(Dataset(X, np.zeros(4)), Grouping.singletons(2, 1.0), BlassoConfig(0.1))
    assert len(b) == 1 and not np.any(b.betas)


def test_infinity_outer_norm_runs(lasso_problem):
    g = Grouping(((0, 1), (2, 3, 4)), 2.0, math.inf)
    b = blasso_path(lasso_problem, g, BlassoConfig(5e-2))
    assert len(b) > 1 and np.all(np.diff(b.lambdas) <= 0)


def test_coordinate_steps_delay_group_entry():
    # A zero L2 group can only be entered one coordinate at a time, so it stays
    # at zero while max|c_j| < lam even though ||c_g|| > lam makes it active in
    # the exact solution.  The lag does not shrink with the step size.
    rng = np.random.default_rng(8)
    rng.normal(size=(50, 2)), rng.normal(size=50)
    X = rng.normal(size=(40, 6))
    d = standardize(Dataset(X, X @ [1.0, -0.7, 0.0, 0.0, 0.6, 0.3] + rng.normal(size=40)))
    g = Grouping(((0, 1), (2, 3), (4, 5)), 2.0)
    b = blasso_path(d, g, BlassoConfig(1e-3))
    lam = 0.62 * b.lambda_max
    beta = b.coef(lam)
    c = d.x.T @ (d.y - d.x @ beta)
    assert not beta[4:].any()
    assert np.abs(c[4:]).max() < lam < np.linalg.norm(c[4:])
    assert np.abs(cvx_minimizer(d, g, lam)[4:]).min() > 1e-2
