"""Choosing lambda: degrees of freedom, AIC_C, cross-validation and a Stein check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .errors import EmptyCandidateSet, FoldTooSmall, SchemeUnavailable, UnsupportedSolver
from .paths.base import Breakpoint, RegularizationPath
from .paths.dispatch import fit_path

GRID_CAP = 200
TIE_TOL = 1e-9


@dataclass
class SelectionResult:
    chosen_lambda: float
    criterion_values: np.ndarray
    criterion_name: str
    df_at_chosen: float
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dfs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray | None = None

    def curve_rows(self):
        """``(lambda, criterion, df)`` rows for CSV output."""
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.lambdas, self.criterion_values, self.dfs)]


def _linf_df(b) -> int:
    """1 plus the coordinates strictly below the block maximum; 0 for a zero block."""
    a = np.abs(b)
    m = a.max(initial=0.0)
    if m == 0.0:
        return 0
    return 1 + int(np.count_nonzero(a < m * (1 - TIE_TOL)))


def df_estimate(breakpoint: Breakpoint, solver: str) -> int:
    """Unbiased df of the fit at a knot.

    lasso: nonzero count.  ilasso: ``|U| + 1``.  icap: per nonzero group,
    ``1 + |U_k|``.  U holds coordinates strictly below their block maximum,
    read off the knot's own coefficients, so a group entering at the knot
    counts only once it moves (as the LASSO count does).  hicap
    (experimental): supernodes plus free coordinates of the segment below.
    The all-zero fit has df 0.
    """
    if solver == "blasso":
        raise UnsupportedSolver("no df estimate is available for BLasso paths")
    beta = breakpoint.beta
    if solver == "lasso":
        return int(np.count_nonzero(beta))
    if not np.any(beta):
        return 0
    if solver == "ilasso":
        return _linf_df(beta)
    if solver == "icap":
        ridge = breakpoint.extra.get("ridge")
        if ridge is None:
            return int(breakpoint.df)
        blocks = [tuple(breakpoint.free.get(k, ())) + tuple(ridge.get(k, ())) for k in breakpoint.active_groups]
        return sum(_linf_df(beta[list(b)]) for b in blocks if b)
    if solver == "hicap":
        return int(breakpoint.df)
    raise UnsupportedSolver(f"no df estimate for solver {solver!r}")


def df_at(path: RegularizationPath, lam: float) -> int:
    """df of the structure in force at ``lam`` (inside a segment)."""
    if path.solver == "blasso":
        raise UnsupportedSolver("no df estimate is available for BLasso paths")
    return int(path.df_at(lam))


def aicc_value(rss: float, k: float, n: int) -> float:
    return 0.5 * n * math.log(rss) + 0.5 * n * (1 + k / n) / (1 - (k + 2) / n)


def aicc(path: RegularizationPath, dataset: Dataset) -> SelectionResult:
    """Minimize AIC_C over the knots; knots with ``df >= n - 2`` are skipped."""
    n = dataset.n
    lams, vals, dfs, betas = [], [], [], []
    for bp in path.breakpoints:
        k = df_estimate(bp, path.solver)
        if k >= n - 2:
            continue
        r = dataset.y - dataset.x @ bp.beta
        rss = max(float(r @ r), np.finfo(float).tiny)
        lams.append(bp.lam)
        vals.append(aicc_value(rss, k, n))
        dfs.append(k)
        betas.append(bp.beta)
    if not lams:
        raise EmptyCandidateSet("every knot has df >= n - 2")
    vals = np.array(vals)
    i = _argmin_large_lambda(np.array(lams), vals)
    return SelectionResult(lams[i], vals, "aicc", float(dfs[i]), np.array(lams), np.array(dfs, dtype=float), betas[i].copy())


def _argmin_large_lambda(lams, vals) -> int:
    best = vals.min()
    ties = np.flatnonzero(vals <= best + 1e-12 * abs(best))
    return int(ties[np.argmax(lams[ties])])


def make_folds(dataset: Dataset, folds: int, scheme: str, seed: int) -> np.ndarray:
    """Fold id for every observation.

    ``random``: a seeded permutation cut into nearly equal parts.
    ``balanced``: rows with identical predictors form a position; each
    position's replicates go to distinct folds, so every fold holds one copy
    of every position.
    """
    n = dataset.n
    if folds < 2 or folds > n:
        raise FoldTooSmall(f"folds must lie in [2, n={n}], got {folds}")
    rng = np.random.default_rng(seed)
    ids = np.empty(n, dtype=int)
    if scheme == "random":
        for f, part in enumerate(np.array_split(rng.permutation(n), folds)):
            ids[part] = f
        return ids
    if scheme == "balanced":
        _, pos = np.unique(dataset.x.round(12), axis=0, return_inverse=True)
        pos = pos.ravel()
        counts = np.bincount(pos)
        if counts.min() != counts.max() or counts[0] % folds:
            raise SchemeUnavailable("balanced folds need every design row replicated a multiple of `folds` times")
        for q in range(counts.size):
            rows = np.flatnonzero(pos == q)
            ids[rows] = rng.permutation(np.arange(rows.size) % folds)
        return ids
    raise SchemeUnavailable(f"unknown fold scheme {scheme!r}")


def _thin(lams: np.ndarray, cap: int) -> np.ndarray:
    """Keep at most ``cap`` knots, nearest to a geometric grid over the positive range."""
    lams = np.unique(lams)[::-1]
    if lams.size <= cap:
        return lams
    pos = lams[lams > 0]
    target = np.geomspace(pos[0], pos[-1], cap - (1 if pos.size < lams.size else 0))
    idx = np.unique([int(np.argmin(np.abs(np.log(pos) - math.log(t)))) for t in target])
    out = pos[idx]
    if pos.size < lams.size:
        out = np.append(out, 0.0)
    return np.sort(out)[::-1]


def cross_validate(
    dataset: Dataset,
    structure=None,
    solver: str = "lasso",
    folds: int = 10,
    fold_scheme: str = "random",
    seed: int = 0,
    **fit_kw,
) -> SelectionResult:
    """K-fold CV over a shared lambda grid; returns the minimizer and the full-data fit there.

    Each training fold is re-centred by its own means so no intercept leaks
    from the held-out rows.
    """
    ids = make_folds(dataset, folds, fold_scheme, seed)
    X, y = dataset.x, dataset.y
    fits = []
    for f in range(folds):
        tr, te = ids != f, ids == f
        if tr.sum() < 2 or te.sum() < 1:
            raise FoldTooSmall(f"fold {f} leaves too few observations")
        xm, ym = X[tr].mean(axis=0), y[tr].mean()
        train = Dataset(X[tr] - xm, y[tr] - ym)
        fits.append((fit_path(train, solver, structure, **fit_kw), xm, ym, te))
    full = fit_path(dataset, solver, structure, **fit_kw)
    union = np.concatenate([p.lambdas for p, *_ in fits] + [full.lambdas])
    floor = max([p.lambdas[-1] for p, *_ in fits if not p.complete] + [full.lambdas[-1] if not full.complete else 0.0])
    grid = _thin(union[union >= floor], GRID_CAP)
    err = np.zeros(grid.size)
    for path, xm, ym, te in fits:
        for i, lam in enumerate(grid):
            r = y[te] - ym - (X[te] - xm) @ path.coef(lam)
            err[i] += r @ r
    err /= dataset.n
    i = _argmin_large_lambda(grid, err)
    try:
        dfs = np.array([df_at(full, lam) for lam in grid], dtype=float)
    except UnsupportedSolver:
        dfs = np.full(grid.size, np.nan)
    return SelectionResult(float(grid[i]), err, "cv", float(dfs[i]), grid, dfs, full.coef(grid[i]))


@dataclass(frozen=True)
class SteinCheck:
    """Monte-Carlo df with paired comparison against the df estimate."""

    oracle: float
    oracle_se: float
    df_mean: float
    diff_mean: float
    diff_se: float

    def within(self, n_se: float = 3.0) -> bool:
        return abs(self.diff_mean) <= n_se * max(self.diff_se, 1e-12)


def stein_df_check(dataset_template: Dataset, beta_true, sigma: float, lam: float, solver: str, draws: int, seed: int, structure=None) -> SteinCheck:
    """Estimate ``sum_i cov(mu_hat_i, y_i) / sigma^2`` by simulation with a fixed design."""
    X = dataset_template.x
    mu = X @ np.asarray(beta_true, dtype=float)
    rng = np.random.default_rng(seed)
    cov_terms, dfs = np.empty(draws), np.empty(draws)
    for d in range(draws):
        e = sigma * rng.standard_normal(X.shape[0])
        path = fit_path(Dataset(X, mu + e), solver, structure)
        mu_hat = X @ path.coef(lam)
        cov_terms[d] = mu_hat @ e / sigma**2
        dfs[d] = df_at(path, lam)
    diff = cov_terms - dfs
    return SteinCheck(
        float(cov_terms.mean()),
        float(cov_terms.std(ddof=1) / math.sqrt(draws)),
        float(dfs.mean()),
        float(diff.mean()),
        float(diff.std(ddof=1) / math.sqrt(draws)),
    )


def stein_df_oracle(dataset_template: Dataset, beta_true, sigma: float, lam: float, solver: str, draws: int, seed: int, structure=None) -> float:
    return stein_df_check(dataset_template, beta_true, sigma, lam, solver, draws, seed, structure).oracle
