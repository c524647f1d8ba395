"""Optimality check shared by every tracer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Dataset, Grouping
from ..penalty import subgradient_distance
from .base import RegularizationPath


@dataclass(frozen=True)
class KKTReport:
    lam: float
    violation: float
    beta: np.ndarray

    def ok(self, tol: float = 1e-8) -> bool:
        return self.violation <= tol


def kkt_violation(beta, dataset: Dataset, grouping: Grouping, lam: float) -> float:
    """sup-norm distance from ``X'(y - X beta)`` to ``lam * dT(beta)``."""
    beta = np.asarray(beta, dtype=float)
    c = dataset.x.T @ (dataset.y - dataset.x @ beta)
    if lam <= 0.0:
        return float(np.abs(c).max())
    return lam * subgradient_distance(beta, grouping, c / lam)


def verify_kkt(path: RegularizationPath, dataset: Dataset, grouping: Grouping, lam: float) -> KKTReport:
    beta = path.coef(lam)
    return KKTReport(float(lam), kkt_violation(beta, dataset, grouping, lam), beta)


def max_path_violation(path: RegularizationPath, dataset: Dataset, grouping: Grouping, interior: int = 0, rng=None) -> float:
    """Largest violation over all knots plus ``interior`` random points per segment."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    lams = path.lambdas
    for lam in lams:
        worst = max(worst, verify_kkt(path, dataset, grouping, lam).violation)
    for a, b in zip(lams[:-1], lams[1:]):
        for u in rng.uniform(0.05, 0.95, size=interior):
            worst = max(worst, verify_kkt(path, dataset, grouping, b + u * (a - b)).violation)
    return worst
