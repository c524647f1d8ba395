"""Exact paths for infinity-norm groups: iLASSO (one group) and iCAP (disjoint groups).

Between knots an active group k keeps its "ridge" coordinates R_k at a common
magnitude a_k with fixed signs, while its "free" coordinates U_k have zero
residual correlation.  Writing the fit through the reduced design

    W = [X_{R_k} s_k for each active k, X_j for each free j]

the stationarity conditions read ``W'(y - W theta) = lam * g`` with ``g`` the
group weights on the ridge columns and 0 on free columns, so ``theta`` is affine
in ``lam``.  Knots occur when a group enters (its L1 correlation reaches
``lam*alpha_k``) or leaves (a_k hits 0), or a coordinate moves between R_k and U_k.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import Dataset, Grouping
from ..errors import DegenerateDesign, OverlappingGroups, WrongNorms
from .base import Breakpoint, RegularizationPath, crossing, l1_entry, refires, solve_gram

# event priority for exact ties: membership changes first
_PRIORITY = {"enter": 0, "leave": 1, "to_ridge": 2, "to_free": 3}


def _check_icap_grouping(grouping: Grouping, p: int):
    if grouping.p != p:
        raise WrongNorms(f"grouping covers {grouping.p} predictors, data has {p}")
    if not grouping.is_nonoverlapping():
        raise OverlappingGroups("iCAP needs nonoverlapping groups")
    if grouping.overall_norm != 1.0 or not all(math.isinf(g) for g in grouping.group_norms):
        raise WrongNorms("iCAP needs gamma0 = 1 and infinity group norms")


def icap_path(
    dataset: Dataset,
    grouping: Grouping,
    max_steps: int | None = None,
    stop_df: int | None = None,
    solver: str = "icap",
) -> RegularizationPath:
    X, y = dataset.x, dataset.y
    n, p = X.shape
    _check_icap_grouping(grouping, p)
    groups = [np.array(g) for g in grouping.groups]
    alpha = np.array(grouping.weights)
    K = len(groups)
    path = RegularizationPath([], solver, dataset.fingerprint())
    rank = int(np.linalg.matrix_rank(X))

    c0 = X.T @ y
    corr = np.array([np.abs(c0[g]).sum() / alpha[k] for k, g in enumerate(groups)])
    lam = float(corr.max())
    if lam <= 0.0:
        path.breakpoints.append(Breakpoint(0.0, np.zeros(p), (), {}, np.zeros(p), 0))
        return path

    active = []  # ordered active groups
    ridge, free, sign = {}, {}, {}  # per active group: R list, U list, signs of R

    def enter(k, c):
        active.append(k)
        ridge[k] = [int(j) for j in groups[k]]
        free[k] = []
        sign[k] = {int(j): float(np.sign(c[j])) for j in groups[k]}

    first = int(np.argmax(corr))
    enter(first, c0)
    path.breakpoints.append(_snapshot(lam, np.zeros(p), active, free, c0, ridge))
    last = ("enter", first)
    max_steps = max_steps or 50 * p + 200

    for _ in range(max_steps):
        cols, g = [], []
        for k in active:
            cols.append(X[:, ridge[k]] @ np.array([sign[k][j] for j in ridge[k]]))
            g.append(alpha[k])
        free_idx = [j for k in active for j in free[k]]
        for j in free_idx:
            cols.append(X[:, j])
            g.append(0.0)
        W = np.column_stack(cols)
        g = np.array(g)
        ta = solve_gram(W, W.T @ y)
        tb = solve_gram(W, g)
        # theta(lam) = ta - lam*tb ; c(lam) = cu + lam*cv
        cu = X.T @ (y - W @ ta)
        cv = X.T @ (W @ tb)
        na = len(active)
        a0, a1 = ta[:na], -tb[:na]
        f0 = dict(zip(free_idx, ta[na:]))
        f1 = dict(zip(free_idx, -tb[na:]))
        full = W.shape[1] >= rank

        events = []
        if not full:
            for k in range(K):
                if k in active:
                    continue
                le = l1_entry(cu[groups[k]], cv[groups[k]], alpha[k], lam)
                if le > -np.inf and not refires(le, lam, ("leave", k), last):
                    events.append((le, "enter", k, None))
        for i, k in enumerate(active):
            le = crossing(a0[i], a1[i], lam)[0]
            if le > -np.inf and not refires(le, lam, ("enter", k), last):
                events.append((le, "leave", k, None))
            for j in free[k]:
                # |beta_j| reaches a_k, from either side of zero
                for sgn in (1.0, -1.0):
                    le = crossing(a0[i] - sgn * f0[j], a1[i] - sgn * f1[j], lam)[0]
                    if le > -np.inf and not refires(le, lam, ("to_free", j), last):
                        events.append((le, "to_ridge", k, (j, sgn)))
            if not full:
                for j in ridge[k]:
                    s = sign[k][j]
                    le = crossing(s * cu[j], s * cv[j], lam)[0]
                    if le > -np.inf and not refires(le, lam, ("to_ridge", j), last) and len(ridge[k]) > 1:
                        events.append((le, "to_free", k, j))

        if events:
            lam_next, kind, k, info = max(events, key=lambda e: (e[0], -_PRIORITY[e[1]], -e[2]))
        else:
            lam_next, kind, k, info = 0.0, None, None, None
        lam_next = max(lam_next, 0.0)

        beta = np.zeros(p)
        for i, kk in enumerate(active):
            a = a0[i] + a1[i] * lam_next
            for j in ridge[kk]:
                beta[j] = sign[kk][j] * a
            for j in free[kk]:
                beta[j] = f0[j] + f1[j] * lam_next
        c = cu + cv * lam_next

        if kind == "enter":
            enter(k, c)
            last = ("enter", k)
        elif kind == "leave":
            beta[groups[k]] = 0.0
            active.remove(k)
            for d in (ridge, free, sign):
                del d[k]
            last = ("leave", k)
        elif kind == "to_ridge":
            j, sgn = info
            free[k].remove(j)
            ridge[k].append(j)
            sign[k][j] = sgn
            beta[j] = sgn * abs(beta[ridge[k][0]])
            last = ("to_ridge", j)
        elif kind == "to_free":
            ridge[k].remove(info)
            free[k].append(info)
            last = ("to_free", info)

        bp = _snapshot(lam_next, beta, active, free, c, ridge)
        if lam_next >= path.breakpoints[-1].lam:
            path.breakpoints[-1] = bp
        else:
            path.breakpoints.append(bp)
        lam = lam_next
        if kind is None or lam <= 0.0:
            break
        if stop_df is not None and bp.df > stop_df:
            path.complete = False
            break
    else:
        raise DegenerateDesign(f"{solver} path did not terminate within the step budget")
    return path


def _snapshot(lam, beta, active, free, c, ridge):
    df = len(active) + sum(len(free[k]) for k in active)
    return Breakpoint(
        float(lam),
        beta,
        tuple(sorted(active)),
        {k: tuple(sorted(free[k])) for k in active},
        np.sign(c),
        df,
        {"ridge": {k: tuple(sorted(ridge[k])) for k in active}},
    )


def ilasso_path(dataset: Dataset, max_steps: int | None = None, stop_df: int | None = None) -> RegularizationPath:
    """Path for 0.5*||y - X b||^2 + lam*||b||_inf.

    Solves the bordered system in (alpha, beta_U) directly: the ridge set R
    collapses into the single column sum_{j in R} s_j X_j, free coordinates
    keep zero correlation, and knots are moves between R and U.
    """
    X, y = dataset.x, dataset.y
    n, p = X.shape
    c0 = X.T @ y
    lam = float(np.abs(c0).sum())
    path = RegularizationPath([], "ilasso", dataset.fingerprint())
    rank = int(np.linalg.matrix_rank(X))
    if lam <= 0.0:
        path.breakpoints.append(Breakpoint(0.0, np.zeros(p), (), {}, np.zeros(p), 0))
        return path
    R = list(range(p))
    U = []
    S = np.sign(c0)
    path.breakpoints.append(Breakpoint(lam, np.zeros(p), (0,), {0: ()}, S.copy(), 1))
    last = None
    max_steps = max_steps or 50 * p + 200
    for _ in range(max_steps):
        xr = X[:, R] @ S[R]
        XU = X[:, U]
        # [xr'xr  xr'XU; XU'xr XU'XU] [alpha; beta_U] = [xr'y - lam; XU'y]
        M = np.block([[np.atleast_2d(xr @ xr), (xr @ XU)[None, :]], [(XU.T @ xr)[:, None], XU.T @ XU]])
        rhs_a = np.concatenate(([xr @ y], XU.T @ y))
        rhs_b = np.zeros(len(U) + 1)
        rhs_b[0] = 1.0
        if np.linalg.cond(M) > 1e10:
            raise DegenerateDesign("iLASSO system is singular")
        za = np.linalg.solve(M, rhs_a)
        zb = -np.linalg.solve(M, rhs_b)  # z(lam) = za + lam*zb
        fit_a = xr * za[0] + XU @ za[1:]
        fit_b = xr * zb[0] + XU @ zb[1:]
        cu, cv = X.T @ (y - fit_a), -(X.T @ fit_b)
        full = len(U) + 1 >= rank
        events = []
        for i, j in enumerate(U):
            for sgn in (1.0, -1.0):
                le = crossing(za[0] - sgn * za[1 + i], zb[0] - sgn * zb[1 + i], lam)[0]
                if le > -np.inf and not refires(le, lam, ("U", j), last):
                    events.append((le, 0, j, sgn))
        if not full and len(R) > 1:
            for j in R:
                le = crossing(S[j] * cu[j], S[j] * cv[j], lam)[0]
                if le > -np.inf and not refires(le, lam, ("R", j), last):
                    events.append((le, 1, j, 0.0))
        le = crossing(za[0], zb[0], lam)[0]
        if le > -np.inf:
            events.append((le, -1, -1, 0.0))
        if events:
            lam_next, kind, j, sgn = max(events, key=lambda e: (e[0], -e[1], -e[2]))
        else:
            lam_next, kind, j, sgn = 0.0, None, None, 0.0
        lam_next = max(lam_next, 0.0)
        z = za + zb * lam_next
        beta = np.zeros(p)
        beta[R] = z[0] * S[R]
        beta[U] = z[1:]
        if kind == 0:
            U.remove(j)
            R.append(j)
            S[j] = sgn
            beta[j] = sgn * z[0]
            last = ("R", j)
        elif kind == 1:
            R.remove(j)
            U.append(j)
            last = ("U", j)
        elif kind == -1:
            # coefficients return to zero; cannot happen for a single group on generic data
            raise DegenerateDesign("iLASSO path returned to zero")
        c = cu + cv * lam_next
        bp = Breakpoint(float(lam_next), beta, (0,), {0: tuple(sorted(U))}, np.sign(c), len(U) + 1)
        if lam_next >= path.breakpoints[-1].lam:
            path.breakpoints[-1] = bp
        else:
            path.breakpoints.append(bp)
        lam = lam_next
        if kind is None or lam <= 0.0:
            break
        if stop_df is not None and bp.df > stop_df:
            path.complete = False
            break
    else:
        raise DegenerateDesign("iLASSO path did not terminate within the step budget")
    return path
