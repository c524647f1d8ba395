"""Boosted Lasso (BLasso) for arbitrary convex CAP penalties.

Works on ``Gamma(beta; lam) = 0.5*RSS(beta) + lam*T(beta)`` with coordinate
moves of fixed size ``eps``:

1. Start at zero and take the signed coordinate step that lowers the loss
   most; set ``lam_0 = (L(0) - L(beta_1)) / (T(beta_1) - T(0))``.
2. Backward: find the signed coordinate move of size ``eps`` that lowers
   ``Gamma`` most (the generalized rule, which also lets a non-separable
   penalty redistribute mass between coordinates).  Accept it if the
   decrease exceeds ``xi``; ``lam`` is unchanged.
3. Otherwise forward: take the loss-minimizing signed coordinate step and set
   ``lam = min(lam, (L(beta_t) - L(beta_{t+1}) - xi) / (T(beta_{t+1}) - T(beta_t)))``
   when the penalty grew.
4. Stop once ``lam`` falls to ``lambda_floor`` or no forward step lowers the loss.

Each time ``lam`` decreases, the last iterate of the finished phase is
recorded as an approximate solution at the old ``lam``.

For penalties that are not separable at the origin (group norms with
``gamma > 1``) the first step underestimates the true ``lambda_max`` and the
first few records, within ``O(n*eps)`` of ``lam_0``, lag the exact solution;
away from that window the error is ``O(eps)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..core import Dataset, Grouping, format_norm
from ..errors import ConfigError, DimensionMismatch, NonConvexNorms, StepBudgetExceeded
from ..penalty import lp_norm
from .base import Breakpoint, RegularizationPath


@dataclass(frozen=True)
class BlassoConfig:
    """``step_size=None`` means ``1e-2 * ||X'y||_inf / n``."""

    step_size: float | None = None
    backward_tolerance: float = 1e-8
    max_steps: int = 200_000
    lambda_floor: float = 0.0

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.backward_tolerance < 0:
            raise ConfigError("backward_tolerance must be nonnegative")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be a positive integer")
        if self.lambda_floor < 0:
            raise ConfigError("lambda_floor must be nonnegative")

    def resolve(self, dataset: Dataset) -> "BlassoConfig":
        if self.step_size is not None:
            return self
        eps = 1e-2 * float(np.abs(dataset.x.T @ dataset.y).max()) / dataset.n
        return BlassoConfig(eps or 1e-8, self.backward_tolerance, self.max_steps, self.lambda_floor)


class _Penalty:
    """CAP penalty with cached group norms and vectorized single-coordinate deltas."""

    def __init__(self, grouping: Grouping):
        self.groups = [np.array(g) for g in grouping.groups]
        self.norms = list(grouping.group_norms)
        self.alpha = np.array(grouping.weights)
        self.g0 = grouping.overall_norm
        self.of = grouping.membership()
        self.p = grouping.p
        self.N = np.zeros(len(self.groups))

    def total(self, N=None) -> float:
        return lp_norm(self.N if N is None else N, self.g0)

    def moved(self, beta, j, delta):
        """Group-norm vector after ``beta_j += delta`` (beta left untouched)."""
        N = self.N.copy()
        old = beta[j]
        beta[j] = old + delta
        for k in self.of[j]:
            N[k] = self.alpha[k] * lp_norm(beta[self.groups[k]], self.norms[k])
        beta[j] = old
        return N

    def _group_new(self, b, D, gamma):
        """Unweighted norm of a group after moving one member ``b_i`` by ``D[:, i]``."""
        a, nb = np.abs(b), np.abs(b + D)
        if math.isinf(gamma):
            order = np.argsort(-a)
            top1 = a[order[0]]
            top2 = a[order[1]] if a.size > 1 else 0.0
            other = np.full(a.shape, top1)
            other[order[0]] = top2
            return np.maximum(other, nb)
        if gamma == 1.0:
            return a.sum() - a + nb
        if gamma == 2.0:
            return np.sqrt(np.maximum(a @ a - a * a + nb * nb, 0.0))
        return np.maximum((a**gamma).sum() - a**gamma + nb**gamma, 0.0) ** (1.0 / gamma)

    def deltas(self, beta, D):
        """Penalty change for every candidate move ``beta_j += D[s, j]``; ``D`` has shape (2, p)."""
        T = self.total()
        if math.isinf(self.g0):
            out = np.empty_like(D)
            for s in range(D.shape[0]):
                for j in range(self.p):
                    out[s, j] = self.total(self.moved(beta, j, D[s, j])) - T
            return out
        acc = np.zeros_like(D)
        for k, g in enumerate(self.groups):
            new = self.alpha[k] * self._group_new(beta[g], D[:, g], self.norms[k])
            acc[:, g] += new - self.N[k] if self.g0 == 1.0 else new**self.g0 - self.N[k] ** self.g0
        if self.g0 == 1.0:
            return acc
        P = float(np.sum(self.N**self.g0))
        return np.maximum(P + acc, 0.0) ** (1.0 / self.g0) - T


def blasso_path(dataset: Dataset, grouping: Grouping, config: BlassoConfig | None = None) -> RegularizationPath:
    if grouping.p != dataset.p:
        raise DimensionMismatch(f"grouping covers {grouping.p} predictors, data has {dataset.p}")
    if grouping.overall_norm < 1 or any(g < 1 for g in grouping.group_norms):
        raise NonConvexNorms("BLasso needs every norm >= 1")
    cfg = (config or BlassoConfig()).resolve(dataset)
    eps, xi = cfg.step_size, cfg.backward_tolerance
    X, y = dataset.x, dataset.y
    p = dataset.p
    gram = X.T @ X
    diag = np.diag(gram).copy()
    c = X.T @ y
    beta = np.zeros(p)
    pen = _Penalty(grouping)
    echo = {k: v for k, v in asdict(cfg).items()}
    echo["group_norms"] = [format_norm(g) for g in grouping.group_norms]
    echo["overall_norm"] = format_norm(grouping.overall_norm)
    path = RegularizationPath([], "blasso", dataset.fingerprint(), approximate=True, config=echo)

    def dloss(j, delta):
        return -delta * c[j] + 0.5 * delta * delta * diag[j]

    def step(j, delta, N):
        nonlocal c
        beta[j] += delta
        if abs(beta[j]) < 1e-9 * eps:
            beta[j] = 0.0
        c = c - gram[:, j] * delta
        pen.N = N

    def forward():
        j = int(np.argmin(-eps * np.abs(c) + 0.5 * eps * eps * diag))
        delta = eps * (1.0 if c[j] >= 0 else -1.0)
        return j, delta, dloss(j, delta)

    def record(lam):
        path.breakpoints.append(Breakpoint(float(lam), beta.copy(), (), {}, np.sign(c), None))

    j, delta, dl = forward()
    if dl >= 0.0:
        record(0.0)
        return path
    N = pen.moved(beta, j, delta)
    lam = -dl / pen.total(N)
    step(j, delta, N)

    for _ in range(cfg.max_steps):
        # steepest coordinate descent on Gamma at the current lam
        T_now = pen.total()
        D = np.vstack([np.full(p, eps), np.full(p, -eps)])
        # moves that would cross zero stop exactly at zero
        cross = (np.abs(beta) < eps * (1 + 1e-9)) & (beta != 0)
        D[0, cross & (beta < 0)] = -beta[cross & (beta < 0)]
        D[1, cross & (beta > 0)] = -beta[cross & (beta > 0)]
        dG = -D * c + 0.5 * D * D * diag + lam * pen.deltas(beta, D)
        s_, k = np.unravel_index(int(np.argmin(dG)), dG.shape)
        if dG[s_, k] < -xi:
            step(k, D[s_, k], pen.moved(beta, k, D[s_, k]))
            continue
        # forward step
        j, delta, dl = forward()
        if dl >= 0.0:
            break
        N = pen.moved(beta, j, delta)
        dT = pen.total(N) - T_now
        if dT > 0:
            new_lam = (-dl - xi) / dT
            if new_lam < lam:
                record(lam)
                lam = max(new_lam, 0.0)
        step(j, delta, N)
        if lam <= cfg.lambda_floor:
            break
    else:
        raise StepBudgetExceeded(f"BLasso used its budget of {cfg.max_steps} steps")
    record(lam)
    # a trailing record at an unchanged lambda replaces the phase-end copy
    if len(path.breakpoints) > 1 and path.breakpoints[-2].lam == path.breakpoints[-1].lam:
        del path.breakpoints[-2]
    return path
