"""Predictor grouping by k-medoids (PAM) on a correlation dissimilarity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Grouping
from .errors import InvalidK, InvalidShape


@dataclass(frozen=True)
class ClusteringResult:
    medoids: tuple
    assignment: np.ndarray
    total_cost: float

    def grouping(self, norm=np.inf) -> Grouping:
        return Grouping.from_labels(self.assignment, norm=norm)


def correlation_distance(dataset: Dataset) -> np.ndarray:
    """``1 - |corr(X_i, X_j)|``."""
    C = np.corrcoef(dataset.x, rowvar=False)
    D = 1.0 - np.abs(np.atleast_2d(C))
    np.fill_diagonal(D, 0.0)
    return np.clip((D + D.T) / 2, 0.0, 1.0)


def _cost(D, medoids):
    return float(D[:, medoids].min(axis=1).sum())


def pam_cluster(dissimilarity, k: int, seed: int = 0, max_swaps: int = 10_000) -> ClusteringResult:
    """BUILD then SWAP.

    BUILD adds, one at a time, the point that lowers the total cost most.
    SWAP repeatedly applies the best cost-lowering medoid/non-medoid exchange
    until none is left.  ``seed`` only orders exact ties.
    """
    D = np.asarray(dissimilarity, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidShape("dissimilarity must be a square matrix")
    p = D.shape[0]
    if not (1 <= k <= p):
        raise InvalidK(f"k must lie in [1, {p}], got {k}")
    rng = np.random.default_rng(seed)
    jitter = rng.permutation(p)  # tie-break order

    def pick(scores):
        best = scores.min()
        ties = np.flatnonzero(scores <= best + 1e-12 * max(1.0, abs(best)))
        return int(ties[np.argmin(jitter[ties])])

    medoids = [pick(D.sum(axis=0))]
    near = D[:, medoids[0]].copy()
    while len(medoids) < k:
        # cost after adding each candidate
        gain = np.minimum(near[:, None], D).sum(axis=0)
        gain[medoids] = np.inf
        m = pick(gain)
        medoids.append(m)
        near = np.minimum(near, D[:, m])

    cost = _cost(D, medoids)
    for _ in range(max_swaps):
        best = (cost, None, None)
        others = np.setdiff1d(np.arange(p), medoids)
        for i, m in enumerate(medoids):
            rest = medoids[:i] + medoids[i + 1 :]
            base = D[:, rest].min(axis=1) if rest else np.full(p, np.inf)
            trial = np.minimum(base[:, None], D[:, others]).sum(axis=0)
            h = pick(np.where(trial < best[0] - 1e-12, trial, np.inf)) if np.any(trial < best[0] - 1e-12) else None
            if h is not None and trial[h] < best[0] - 1e-12:
                best = (float(trial[h]), i, int(others[h]))
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        cost = best[0]
    medoids = sorted(medoids)
    assign = np.argmin(D[:, medoids], axis=1)
    # a medoid belongs to its own cluster even when distances tie
    for c, m in enumerate(medoids):
        assign[m] = c
    return ClusteringResult(tuple(medoids), assign, _cost(D, medoids))
