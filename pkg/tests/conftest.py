"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import math

import cvxpy as cp
import numpy as np
import pytest

from capreg.core import Dataset, Grouping, standardize


def random_problem(rng, n_range=(8, 20), p_range=(2, 6), noise=1.0):
    n = int(rng.integers(*n_range, endpoint=True))
    p = int(rng.integers(*p_range, endpoint=True))
    X = rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + noise * rng.normal(size=n)
    return standardize(Dataset(X, y))


def orthonormal_dataset(xty, n=None, seed=0):
    """Centered design with ``X'X = I`` and ``X'y = xty`` exactly."""
    xty = np.asarray(xty, dtype=float)
    p = xty.size
    n = n or p + 4
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, p + 1))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    X, e = Q[:, :p], Q[:, p]
    y = X @ xty + 0.5 * e
    return Dataset(X, y)


def cap_expr(beta, grouping: Grouping):
    terms = []
    for g, gam, w in zip(grouping.groups, grouping.group_norms, grouping.weights):
        terms.append(w * cp.norm(beta[list(g)], "inf" if math.isinf(gam) else gam))
    stacked = cp.hstack(terms)
    g0 = grouping.overall_norm
    return cp.norm(stacked, "inf" if math.isinf(g0) else g0)


def cvx_minimizer(dataset: Dataset, grouping: Grouping, lam: float) -> np.ndarray:
    """Minimize ``0.5*RSS + lam*T`` with an interior-point solver at tight tolerance."""
    b = cp.Variable(dataset.p)
    obj = 0.5 * cp.sum_squares(dataset.y - dataset.x @ b) + lam * cap_expr(b, grouping)
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return np.asarray(b.value, dtype=float)


def grid_minimizer(f, box, step):
    """Brute-force minimizer of ``f`` over a 2-d grid."""
    ticks = np.arange(box[0], box[1] + step / 2, step)
    B1, B2 = np.meshgrid(ticks, ticks, indexing="ij")
    vals = f(B1, B2)
    i = np.unravel_index(np.argmin(vals), vals.shape)
    return np.array([B1[i], B2[i]]), float(vals[i])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
