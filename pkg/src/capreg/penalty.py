"""CAP penalty values, subdifferential membership and the penalized objective.

The penalty is ``T(beta) = || (a_k * ||beta_{G_k}||_{g_k})_k ||_{g_0}``.  The
outer norm is applied without an exponent; for ``g_0 = 1`` this is the usual
weighted sum of group norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import Dataset, Grouping
from .errors import DimensionMismatch, IndexOutOfRange, InvalidNorm

MEMBERSHIP_TOL = 1e-8
KINK_TOL = 1e-10


def lp_norm(v, gamma: float) -> float:
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if math.isinf(gamma):
        return float(v.max())
    if gamma == 1.0:
        return float(v.sum())
    if gamma == 2.0:
        return float(math.sqrt(v @ v))
    m = v.max()
    if m == 0.0:
        return 0.0
    return float(m * np.sum((v / m) ** gamma) ** (1.0 / gamma))


def dual_exponent(gamma: float) -> float:
    if math.isinf(gamma):
        return 1.0
    if gamma == 1.0:
        return math.inf
    return gamma / (gamma - 1.0)


@dataclass(frozen=True)
class PenaltyValue:
    total: float
    group_norms: np.ndarray


def _check(beta, grouping: Grouping):
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != grouping.p:
        raise IndexOutOfRange(f"grouping covers {grouping.p} indices, beta has length {beta.shape[0]}")
    return beta


def evaluate(beta, grouping: Grouping) -> PenaltyValue:
    beta = _check(beta, grouping)
    norms = np.array(
        [w * lp_norm(beta[list(g)], gk) for g, gk, w in zip(grouping.groups, grouping.group_norms, grouping.weights)]
    )
    return PenaltyValue(lp_norm(norms, grouping.overall_norm), norms)


def penalty(beta, grouping: Grouping) -> float:
    return evaluate(beta, grouping).total


def loss(beta, dataset: Dataset) -> float:
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != dataset.p:
        raise DimensionMismatch(f"beta has length {beta.shape[0]}, data has p={dataset.p}")
    r = dataset.y - dataset.x @ beta
    return 0.5 * float(r @ r)


def objective(beta, dataset: Dataset, grouping: Grouping, lam: float) -> float:
    """Half residual sum of squares plus ``lam`` times the CAP penalty."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if grouping.p != dataset.p:
        raise DimensionMismatch(f"grouping covers {grouping.p} predictors, data has {dataset.p}")
    return loss(beta, dataset) + lam * penalty(beta, grouping)


# --------------------------------------------------------------------------
# subdifferential distance


def _bisect(feasible, hi, iters=200):
    lo = 0.0
    if feasible(lo):
        return 0.0
    while not feasible(hi):
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi


def _dist_to_ball(c, q, radius):
    """sup-norm distance from ``c`` to the L_q ball of the given radius."""
    a = np.abs(c)
    if math.isinf(q):
        return max(float(a.max(initial=0.0)) - radius, 0.0)
    return _bisect(lambda t: lp_norm(np.maximum(a - t, 0.0), q) <= radius * (1 + 1e-15), float(a.max(initial=0.0)) + 1.0)


def _dist_to_face(u, radius):
    """sup-norm distance from ``u`` to ``{theta >= 0, sum(theta) = radius}``."""
    return _bisect(
        lambda t: np.maximum(u - t, 0.0).sum() <= radius * (1 + 1e-15) and np.maximum(u + t, 0.0).sum() >= radius * (1 - 1e-15),
        float(np.abs(u).max(initial=0.0)) + radius + 1.0,
    )


def _group_state(bg, gamma):
    m = float(np.abs(bg).max(initial=0.0))
    zero = m <= KINK_TOL
    at_max = np.abs(bg) >= m - KINK_TOL * max(1.0, m)
    return zero, at_max, m


def _group_distance(cg, bg, gamma, alpha):
    """Distance from ``cg`` to ``alpha * d||.||_gamma (bg)``."""
    zero, at_max, _ = _group_state(bg, gamma)
    if zero:
        return _dist_to_ball(cg, dual_exponent(gamma), alpha)
    s = np.sign(bg)
    if math.isinf(gamma):
        off = float(np.abs(cg[~at_max]).max(initial=0.0))
        return max(off, _dist_to_face(s[at_max] * cg[at_max], alpha))
    if gamma == 1.0:
        nz = np.abs(bg) > KINK_TOL
        d_nz = float(np.abs(cg[nz] - alpha * s[nz]).max(initial=0.0))
        d_z = max(float(np.abs(cg[~nz]).max(initial=0.0)) - alpha, 0.0)
        return max(d_nz, d_z)
    grad = alpha * _norm_gradient(bg, gamma)
    return float(np.abs(cg - grad).max())


def _norm_gradient(bg, gamma):
    nrm = lp_norm(bg, gamma)
    return np.sign(bg) * (np.abs(bg) / nrm) ** (gamma - 1.0)


def subgradient_distance(beta, grouping: Grouping, candidate) -> float:
    """sup-norm distance from ``candidate`` to the subdifferential of T at ``beta``."""
    beta = _check(beta, grouping)
    cand = np.asarray(candidate, dtype=float).ravel()
    if cand.shape != beta.shape:
        raise DimensionMismatch("candidate and beta differ in length")
    norms = (grouping.overall_norm,) + tuple(grouping.group_norms)
    if min(norms) < 1.0:
        raise InvalidNorm("subdifferential membership requires every norm >= 1")
    if grouping.overall_norm == 1.0:
        if grouping.is_nonoverlapping():
            return max(
                _group_distance(cand[list(g)], beta[list(g)], gk, w)
                for g, gk, w in zip(grouping.groups, grouping.group_norms, grouping.weights)
            )
        lp = _overlap_distance_lp(beta, grouping, cand)
        if lp is not None:
            return lp
    return _distance_cvx(beta, grouping, cand)


def subgradient_set_contains(beta, grouping: Grouping, candidate, tol: float = MEMBERSHIP_TOL) -> bool:
    return subgradient_distance(beta, grouping, candidate) <= tol


def _overlap_distance_lp(beta, grouping, cand):
    """Linear program for overlapping groups with outer L1 and group norms in {1, inf}.

    Returns None when some all-zero group uses a norm the LP cannot express.
    """
    p = beta.shape[0]
    # variable layout: [t, then per-group blocks]; each block adds terms to coordinates
    cols = []  # (coordinate, coefficient) per variable
    bounds = [(0, None)]
    A_ub, A_eq = [], []
    fixed = np.zeros(p)
    nvar = 1

    def new_var(coord, coef, lb, ub):
        nonlocal nvar
        cols.append((coord, coef))
        bounds.append((lb, ub))
        nvar += 1
        return nvar - 1

    group_rows = []
    for g, gk, w in zip(grouping.groups, grouping.group_norms, grouping.weights):
        idx = np.array(g)
        bg = beta[idx]
        zero, at_max, _ = _group_state(bg, gk)
        if zero:
            if math.isinf(gk):
                vs = [new_var(j, 1.0, 0, None) for j in idx] + [new_var(j, -1.0, 0, None) for j in idx]
                group_rows.append(("ub", vs, w))
            elif gk == 1.0:
                for j in idx:
                    new_var(j, 1.0, -w, w)
            else:
                return None
        elif math.isinf(gk):
            vs = [new_var(j, float(np.sign(beta[j])), 0, None) for j in idx[at_max]]
            group_rows.append(("eq", vs, w))
        elif gk == 1.0:
            for j in idx:
                if abs(beta[j]) > KINK_TOL:
                    fixed[j] += w * np.sign(beta[j])
                else:
                    new_var(j, 1.0, -w, w)
        else:
            fixed[idx] += w * _norm_gradient(bg, gk)

    def row_for(vs):
        r = np.zeros(nvar)
        r[vs] = 1.0
        return r

    for kind, vs, w in group_rows:
        if kind == "ub":
            A_ub.append((vs, w))
        else:
            A_eq.append((vs, w))
    # |cand - fixed - sum w| <= t
    M = np.zeros((p, nvar))
    for v, (coord, coef) in enumerate(cols, start=1):
        M[coord, v] = coef
    target = cand - fixed
    rows_ub = [np.concatenate(([-1.0], M[j, 1:])) for j in range(p)] + [
        np.concatenate(([-1.0], -M[j, 1:])) for j in range(p)
    ]
    rhs_ub = list(target) + list(-target)
    for vs, w in A_ub:
        rows_ub.append(row_for(vs))
        rhs_ub.append(w)
    rows_eq = [row_for(vs) for vs, _ in A_eq]
    rhs_eq = [w for _, w in A_eq]
    c = np.zeros(nvar)
    c[0] = 1.0
    res = linprog(
        c,
        A_ub=np.array(rows_ub),
        b_ub=np.array(rhs_ub),
        A_eq=np.array(rows_eq) if rows_eq else None,
        b_eq=np.array(rhs_eq) if rows_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"membership LP failed: {res.message}")
    return float(max(res.x[0], 0.0))


def _distance_cvx(beta, grouping, cand):
    import cvxpy as cp

    K = grouping.n_groups
    N = evaluate(beta, grouping).group_norms
    g0 = grouping.overall_norm
    mu = cp.Variable(K, nonneg=True)
    cons = []
    if N.max() <= KINK_TOL:
        if math.isinf(dual_exponent(g0)):
            cons.append(mu <= 1)
        else:
            cons.append(cp.norm(mu, dual_exponent(g0)) <= 1)
    elif g0 == 1.0:
        for k in range(K):
            cons.append(mu[k] == 1.0 if N[k] > KINK_TOL else mu[k] <= 1.0)
    elif math.isinf(g0):
        top = N >= N.max() - KINK_TOL * max(1.0, N.max())
        cons += [mu[~top] == 0, cp.sum(mu) == 1]
    else:
        cons.append(mu == N ** (g0 - 1.0) / lp_norm(N, g0) ** (g0 - 1.0))
    total = 0
    for k, (g, gk, w) in enumerate(zip(grouping.groups, grouping.group_norms, grouping.weights)):
        idx = np.array(g)
        bg = beta[idx]
        zero, at_max, _ = _group_state(bg, gk)
        wk = cp.Variable(len(idx))
        if zero:
            q = dual_exponent(gk)
            cons.append(cp.norm(wk, "inf" if math.isinf(q) else q) <= w * mu[k])
        elif math.isinf(gk):
            theta = cp.Variable(len(idx), nonneg=True)
            s = np.sign(bg)
            cons += [wk == cp.multiply(s, theta), cp.sum(theta) == w * mu[k]]
            if (~at_max).any():
                cons.append(theta[np.flatnonzero(~at_max)] == 0)
        elif gk == 1.0:
            nz = np.abs(bg) > KINK_TOL
            if nz.any():
                cons.append(wk[np.flatnonzero(nz)] == w * mu[k] * np.sign(bg[nz]))
            if (~nz).any():
                cons.append(cp.abs(wk[np.flatnonzero(~nz)]) <= w * mu[k])
        else:
            cons.append(wk == w * mu[k] * _norm_gradient(bg, gk))
        E = np.zeros((beta.shape[0], len(idx)))
        E[idx, np.arange(len(idx))] = 1.0
        total = total + E @ wk
    prob = cp.Problem(cp.Minimize(cp.norm(cand - total, "inf")), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(max(prob.value, 0.0))
