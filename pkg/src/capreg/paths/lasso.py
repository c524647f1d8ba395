"""Homotopy (LARS-LASSO) path for 0.5*||y - X b||^2 + lam*||b||_1."""
from __future__ import annotations

import numpy as np

from ..core import Dataset
from ..errors import DegenerateDesign
from .base import Breakpoint, RegularizationPath, crossing, refires, solve_gram


def lasso_path(dataset: Dataset, max_steps: int | None = None, stop_df: int | None = None) -> RegularizationPath:
    X, y = dataset.x, dataset.y
    n, p = X.shape
    c0 = X.T @ y
    lam = float(np.abs(c0).max())
    beta = np.zeros(p)
    path = RegularizationPath([], "lasso", dataset.fingerprint())
    if lam <= 0.0:
        path.breakpoints.append(Breakpoint(0.0, beta, (), {}, np.zeros(p), 0))
        return path

    active, signs = [], []
    rank_cap = int(np.linalg.matrix_rank(X))
    first = int(np.argmax(np.abs(c0)))
    active.append(first)
    signs.append(float(np.sign(c0[first])))
    path.breakpoints.append(Breakpoint(lam, beta.copy(), (first,), {}, np.sign(c0), 1))
    last = ("add", first)
    max_steps = max_steps or 20 * p + 100

    for _ in range(max_steps):
        A = np.array(active)
        s = np.array(signs)
        XA = X[:, A]
        # beta_A(lam) = G^{-1}(X_A'y) - lam * G^{-1} s
        ba = solve_gram(XA, XA.T @ y)
        bb = solve_gram(XA, s)
        fit_a, fit_b = XA @ ba, XA @ bb
        cu = X.T @ (y - fit_a)
        cv = X.T @ fit_b
        # inactive j: |c_j| = lam  <=>  lam -/+ c_j = 0 reached from above
        inact = np.setdiff1d(np.arange(p), A)
        cand = []
        if len(A) < rank_cap and inact.size:
            for sgn in (1.0, -1.0):
                r = crossing(-sgn * cu[inact], 1.0 - sgn * cv[inact], lam)
                for j, lj in zip(inact, r):
                    if lj > -np.inf and not refires(lj, lam, ("drop", j), last):
                        cand.append((lj, 0, "add", int(j), sgn))
        # active coefficient reaching zero
        r = crossing(s * ba, -s * bb, lam)
        for j, lj in zip(A, r):
            if lj > -np.inf and not refires(lj, lam, ("add", j), last):
                cand.append((lj, 0, "drop", int(j), 0.0))
        if cand:
            lam_next, _, kind, j, sgn = max(cand, key=lambda e: (e[0], -e[3]))
        else:
            lam_next, kind = 0.0, None
        lam_next = max(lam_next, 0.0)
        beta = np.zeros(p)
        beta[A] = ba - lam_next * bb
        if kind == "add":
            active.append(j)
            signs.append(sgn)
        elif kind == "drop":
            i = active.index(j)
            del active[i], signs[i]
            beta[j] = 0.0
        last = (kind, j) if kind else None
        c = X.T @ (y - X @ beta)
        bp = Breakpoint(lam_next, beta, tuple(sorted(active)), {}, np.sign(c), len(active))
        if lam_next >= path.breakpoints[-1].lam:
            # zero-length step from a tie: fold into the previous knot
            path.breakpoints[-1] = bp
        else:
            path.breakpoints.append(bp)
        lam = lam_next
        if kind is None or lam <= 0.0:
            break
        if stop_df is not None and len(active) > stop_df:
            path.complete = False
            break
    else:
        raise DegenerateDesign("lasso path did not terminate within the step budget")
    return path
