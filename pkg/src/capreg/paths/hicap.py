"""Exact path for overlapping infinity-norm groups (hiCAP and its DAG extension).

Penalty: ``sum_m alpha_m * ||beta_{G_m}||_inf`` with arbitrary overlaps; for a
tree hierarchy compiled by :func:`capreg.hierarchy.compile_penalty` each group
is a complete subtree.

State between knots
-------------------
* supernodes: coordinates tied to a common magnitude ``a`` with fixed signs,
  together with the groups whose maximum they attain (their *assigned* groups);
* free coordinates: nonzero, below the maximum of every group containing
  them, with zero residual correlation;
* zero groups: groups whose coefficients are all zero.

The fit is ``W theta`` with one column ``X_C s_C`` per supernode and one column
per free coordinate; ``W'(y - W theta) = lam * g`` with ``g`` the summed
assigned weights, so ``theta`` is affine in ``lam``.

The subgradient has to be shared out among groups.  Inside a supernode the
demands ``s_j c_j`` must be covered by the assigned weights (a transportation
problem); on the zero region ``|c_j|`` must fit inside the dual balls of the
zero groups.  Both are Hall-type conditions ``demand(S) <= lam*weight(N(S))``;
the most violated set ``S`` is a min-cut, found here with a small totally
unimodular LP.  Knots:

* a supernode's magnitude reaches zero (its groups become zero groups);
* a supernode or free coordinate reaches the magnitude of a supernode that
  owns a group containing it (merge);
* a Hall set inside a supernode becomes tight (the set splits off upward);
* a Hall set in the zero region becomes tight (it enters as a new supernode).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from ..core import Dataset, Grouping
from ..errors import DegenerateDesign, NotATree, WrongNorms
from ..hierarchy import HierarchyGraph, compile_penalty
from .base import Breakpoint, RegularizationPath, crossing, l1_entry, refires, solve_gram

_PRIORITY = {"enter": 0, "death": 1, "split": 2, "merge": 3, "absorb": 4}


@dataclass
class Supernode:
    coords: list
    sign: dict
    groups: set = field(default_factory=set)


def _max_violation(gain, cost, edges):
    """Maximize ``gain.x - cost.z`` subject to ``x_j <= z_m`` on edges, 0 <= x, z <= 1.

    The constraint matrix is a network matrix, so the optimum is a 0/1 vertex.
    Returns ``(value, chosen x indices, chosen z indices)``.
    """
    nx_, nz = len(gain), len(cost)
    rows = np.arange(len(edges))
    ej = np.array([e[0] for e in edges], dtype=int)
    em = np.array([e[1] for e in edges], dtype=int)
    data = np.concatenate([np.ones(len(edges)), -np.ones(len(edges))])
    A = coo_matrix((data, (np.concatenate([rows, rows]), np.concatenate([ej, nx_ + em]))), shape=(len(edges), nx_ + nz))
    res = linprog(
        np.concatenate([-gain, cost]),
        A_ub=A.tocsr() if len(edges) else None,
        b_ub=np.zeros(len(edges)) if len(edges) else None,
        bounds=[(0, 1)] * (nx_ + nz),
        method="highs-ds",
    )
    if res.status != 0:
        raise DegenerateDesign(f"Hall LP failed: {res.message}")
    x = res.x[:nx_] > 0.5
    z = res.x[nx_:] > 0.5
    return -res.fun, np.flatnonzero(x), np.flatnonzero(z)


class _Tracer:
    def __init__(self, dataset: Dataset, grouping: Grouping, max_steps=None, stop_df=None, solver="hicap"):
        if grouping.overall_norm != 1.0 or not all(math.isinf(g) for g in grouping.group_norms):
            raise WrongNorms("hiCAP needs gamma0 = 1 and infinity group norms")
        if grouping.p != dataset.p:
            raise WrongNorms(f"grouping covers {grouping.p} predictors, data has {dataset.p}")
        self.X, self.y = dataset.x, dataset.y
        self.n, self.p = self.X.shape
        self.G = [np.array(g) for g in grouping.groups]
        self.alpha = np.array(grouping.weights)
        self.member = grouping.membership()
        self.rank = int(np.linalg.matrix_rank(self.X))
        self.max_steps = max_steps or 100 * self.p + 500
        self.stop_df = stop_df
        self.path = RegularizationPath([], solver, dataset.fingerprint())
        self.nodes: list[Supernode] = []
        self.free: set = set()
        self.zero_groups: set = set(range(len(self.G)))

    # ---------------------------------------------------------------- helpers
    def zero_coords(self):
        out = set()
        for m in self.zero_groups:
            out.update(self.G[m].tolist())
        return sorted(out)

    def _hall_zero(self, c_abs, coords):
        """Most violated zero-region Hall set for correlations ``c_abs`` (indexed by coords)."""
        zg = sorted(self.zero_groups)
        pos = {j: i for i, j in enumerate(coords)}
        gpos = {m: i for i, m in enumerate(zg)}
        edges = [(pos[j], gpos[m]) for m in zg for j in self.G[m]]
        return zg, pos, edges

    def components(self, coords, groups):
        """Split ``coords`` into pieces linked by shared groups; coordinates in no group are returned apart."""
        coords = list(coords)
        cset = set(coords)
        parent = {j: j for j in coords}

        def find(j):
            while parent[j] != j:
                parent[j] = parent[parent[j]]
                j = parent[j]
            return j

        touched = set()
        gmap = {}
        for m in groups:
            inside = [j for j in self.G[m] if j in cset]
            if not inside:
                continue
            touched.update(inside)
            r = find(inside[0])
            for j in inside[1:]:
                parent[find(j)] = r
            gmap[m] = inside[0]
        comps = {}
        for j in coords:
            if j in touched:
                comps.setdefault(find(j), ([], set()))[0].append(j)
        for m, j in gmap.items():
            comps[find(j)][1].add(m)
        lonely = [j for j in coords if j not in touched]
        return list(comps.values()), lonely

    # ---------------------------------------------------------------- system
    def system(self):
        cols, g = [], []
        for nd in self.nodes:
            cols.append(self.X[:, nd.coords] @ np.array([nd.sign[j] for j in nd.coords]))
            g.append(self.alpha[list(nd.groups)].sum())
        free = sorted(self.free)
        for j in free:
            cols.append(self.X[:, j])
            g.append(0.0)
        W = np.column_stack(cols) if cols else np.zeros((self.n, 0))
        g = np.array(g)
        ta = solve_gram(W, W.T @ self.y)
        tb = solve_gram(W, g)
        cu = self.X.T @ (self.y - W @ ta)
        cv = self.X.T @ (W @ tb)
        return W, ta, -tb, free, cu, cv

    def beta_at(self, lam, t0, t1, free):
        beta = np.zeros(self.p)
        k = len(self.nodes)
        for i, nd in enumerate(self.nodes):
            a = t0[i] + t1[i] * lam
            for j in nd.coords:
                beta[j] = nd.sign[j] * a
        for i, j in enumerate(free):
            beta[j] = t0[k + i] + t1[k + i] * lam
        return beta

    # ---------------------------------------------------------------- events
    def simple_events(self, lam, t0, t1, free, last):
        events = []
        k = len(self.nodes)
        fpos = {j: k + i for i, j in enumerate(free)}
        owner = {}
        for i, nd in enumerate(self.nodes):
            for j in nd.coords:
                owner[j] = i
        for i, nd in enumerate(self.nodes):
            le = crossing(t0[i], t1[i], lam)[0]
            key = ("de", frozenset(nd.coords))
            if le > -np.inf and not refires(le, lam, key, last):
                events.append((le, "death", i, key))
            seen = set()
            for m in nd.groups:
                for j in self.G[m]:
                    if j in seen or owner.get(j) == i:
                        continue
                    seen.add(j)
                    if j in owner:
                        i2 = owner[j]
                        key = ("ms", frozenset(nd.coords) | frozenset(self.nodes[i2].coords))
                        le = crossing(t0[i] - t0[i2], t1[i] - t1[i2], lam)[0]
                        if le > -np.inf and not refires(le, lam, key, last):
                            events.append((le, "merge", (i, i2), key))
                    elif j in fpos:
                        f = fpos[j]
                        key = ("ms", frozenset(nd.coords) | {j})
                        for sgn in (1.0, -1.0):
                            le = crossing(t0[i] - sgn * t0[f], t1[i] - sgn * t1[f], lam)[0]
                            if le > -np.inf and not refires(le, lam, key, last):
                                events.append((le, "absorb", (i, j, sgn), key))
        return events

    def split_event(self, i, lam_t, lam_low, cu, cv, last):
        """Largest knot in ``[lam_low, lam_t]`` where a Hall set inside supernode ``i`` tightens."""
        nd = self.nodes[i]
        if len(nd.coords) < 2:
            return None
        coords = nd.coords
        s = np.array([nd.sign[j] for j in coords])
        du, dv = s * cu[coords], s * cv[coords]
        groups = sorted(nd.groups)
        pos = {j: a for a, j in enumerate(coords)}
        edges = [(pos[j], b) for b, m in enumerate(groups) for j in self.G[m] if j in pos]
        al = self.alpha[groups]
        scale = 1.0 + np.abs(du).sum() + np.abs(dv).sum() * lam_t

        def violation(lam):
            return _max_violation(du + dv * lam, al * lam, edges)

        L = lam_low
        best = None
        for _ in range(len(coords) + 5):
            val, xs, zs = violation(L)
            if val <= 1e-10 * scale:
                break
            A = du[xs].sum()
            B = dv[xs].sum() - al[zs].sum()
            if B >= 0:
                break
            root = -A / B
            if root <= L:
                break
            L, best = min(root, lam_t), (xs, zs)
            if L >= lam_t:
                break
        if best is None:
            return None
        # the set that actually breaks away just below the knot
        eta = 1e-7 * max(L, 1e-12)
        val, xs, zs = violation(L - eta)
        if val <= 0.0:
            xs, zs = best
        S = frozenset(coords[a] for a in xs)
        key = ("ms", frozenset(coords))
        if len(S) in (0, len(coords)) and len(zs) == len(groups):
            return None
        if refires(L, lam_t, key, last):
            return None
        return (L, "split", (i, S, frozenset(groups[b] for b in zs)), key)

    def entry_event(self, lam_t, lam_low, cu, cv, last):
        if not self.zero_groups:
            return None
        coords = self.zero_coords()
        zg, pos, edges = self._hall_zero(None, coords)
        cu_z, cv_z = cu[coords], cv[coords]
        al = self.alpha[zg]
        scale = 1.0 + np.abs(cu_z).sum() + np.abs(cv_z).sum() * lam_t

        def violation(lam):
            return _max_violation(np.abs(cu_z + cv_z * lam), al * lam, edges)

        L = lam_low
        best = None
        for _ in range(len(coords) + 5):
            val, xs, zs = violation(L)
            if val <= 1e-10 * scale:
                break
            root = l1_entry(cu_z[xs], cv_z[xs], al[zs].sum(), lam_t)
            if not root > L:
                break
            L, best = root, (xs, zs)
            if L >= lam_t:
                break
        if best is None:
            return None
        eta = 1e-7 * max(L, 1e-12)
        val, xs, zs = violation(L - eta)
        if val <= 0.0 or len(xs) == 0:
            xs, zs = best
        S = frozenset(coords[a] for a in xs)
        key = ("de", S)
        if refires(L, lam_t, key, last):
            return None
        return (L, "enter", (S, frozenset(zg[b] for b in zs)), key)

    # ---------------------------------------------------------------- updates
    def add_nodes(self, coords, groups, signs):
        comps, lonely = self.components(coords, groups)
        for cs, gs in comps:
            self.nodes.append(Supernode(sorted(cs), {j: signs[j] for j in cs}, set(gs)))
        return lonely

    def apply(self, kind, info, beta, c):
        if kind == "death":
            nd = self.nodes.pop(info)
            self.zero_groups |= nd.groups
            zc = set(self.zero_coords())
            self.free -= zc
            beta[list(zc)] = 0.0
        elif kind == "merge":
            i, i2 = info
            a, b = self.nodes[i], self.nodes[i2]
            a.coords = sorted(a.coords + b.coords)
            a.sign.update(b.sign)
            a.groups |= b.groups
            self.nodes.pop(i2)
            lvl = np.abs(beta[a.coords]).max()
            for j in a.coords:
                beta[j] = a.sign[j] * lvl
        elif kind == "absorb":
            i, j, sgn = info
            nd = self.nodes[i]
            self.free.discard(j)
            nd.coords = sorted(nd.coords + [j])
            nd.sign[j] = sgn
            beta[j] = sgn * abs(beta[nd.coords[0] if nd.coords[0] != j else nd.coords[-1]])
        elif kind == "split":
            i, S, zs = info
            nd = self.nodes.pop(i)
            up_groups = set(zs) & nd.groups
            rest = [j for j in nd.coords if j not in S]
            lonely = self.add_nodes(sorted(S), up_groups, nd.sign)
            lonely += self.add_nodes(rest, nd.groups - up_groups, nd.sign)
            self.free.update(lonely)
        elif kind == "enter":
            S, zs = info
            zs = set(zs)
            self.zero_groups -= zs
            remaining = set(self.zero_coords())
            signs = {j: float(np.sign(c[j])) or 1.0 for j in S}
            lonely = self.add_nodes(sorted(S), zs, signs)
            # coordinates of entering groups left outside every zero group
            stray = set().union(*(set(self.G[m].tolist()) for m in zs)) - set(S) - remaining
            self.free.update(lonely)
            self.free.update(stray)

    def snapshot(self, lam, beta, c):
        df = len(self.nodes) + len(self.free)
        active = sorted(set().union(*(nd.groups for nd in self.nodes))) if self.nodes else []
        return Breakpoint(
            float(lam),
            beta,
            tuple(active),
            {},
            np.sign(c),
            df,
            {
                "supernodes": [tuple(nd.coords) for nd in self.nodes],
                "free": tuple(sorted(self.free)),
            },
        )

    # ---------------------------------------------------------------- driver
    def run(self) -> RegularizationPath:
        c0 = self.X.T @ self.y
        zero_c = np.zeros(self.p)
        if not np.any(c0):
            self.path.breakpoints.append(Breakpoint(0.0, np.zeros(self.p), (), {}, zero_c, 0))
            return self.path
        # lambda_0: largest ratio |c|(S) / alpha(N(S)) over Hall sets (Dinkelbach)
        coords = list(range(self.p))
        zg, _, edges = self._hall_zero(None, coords)
        gain, al = np.abs(c0), self.alpha[zg]
        lam = 0.0
        for _ in range(self.p + 5):
            val, xs, zs = _max_violation(gain, al * lam, edges)
            if val <= 1e-12 * gain.sum():
                break
            lam = gain[xs].sum() / al[zs].sum()
        _, xs, zs = _max_violation(gain, al * lam * (1 - 1e-9), edges)
        S = frozenset(coords[a] for a in xs)
        last = ("de", S)
        self.apply("enter", (S, frozenset(zg[b] for b in zs)), np.zeros(self.p), c0)
        self.path.breakpoints.append(self.snapshot(lam, np.zeros(self.p), c0))

        for _ in range(self.max_steps):
            W, t0, t1, free, cu, cv = self.system()
            full = W.shape[1] >= self.rank
            events = self.simple_events(lam, t0, t1, free, last)
            low = max([e[0] for e in events], default=0.0)
            if not full:
                for i in range(len(self.nodes)):
                    e = self.split_event(i, lam, low, cu, cv, last)
                    if e is not None:
                        events.append(e)
                        low = max(low, e[0])
                e = self.entry_event(lam, low, cu, cv, last)
                if e is not None:
                    events.append(e)
            if events:
                lam_next, kind, info, key = max(events, key=lambda e: (e[0], -_PRIORITY[e[1]]))
            else:
                lam_next, kind, info, key = 0.0, None, None, None
            lam_next = max(min(lam_next, lam), 0.0)
            beta = self.beta_at(lam_next, t0, t1, free)
            c = cu + cv * lam_next
            if kind is not None:
                self.apply(kind, info, beta, c)
            last = key
            bp = self.snapshot(lam_next, beta, c)
            if lam_next >= self.path.breakpoints[-1].lam:
                self.path.breakpoints[-1] = bp
            else:
                self.path.breakpoints.append(bp)
            lam = lam_next
            if kind is None or lam <= 0.0:
                break
            if self.stop_df is not None and bp.df > self.stop_df:
                self.path.complete = False
                break
        else:
            raise DegenerateDesign("hiCAP path did not terminate within the step budget")
        return self.path


def overlap_path(dataset: Dataset, grouping: Grouping, max_steps=None, stop_df=None, solver="overlap") -> RegularizationPath:
    """Exact path for any (possibly overlapping) grouping with gamma0 = 1 and infinity norms."""
    return _Tracer(dataset, grouping, max_steps, stop_df, solver).run()


def hicap_path(
    dataset: Dataset,
    graph: HierarchyGraph,
    weights=None,
    allow_dag: bool = False,
    max_steps=None,
    stop_df=None,
) -> RegularizationPath:
    """Exact path for the infinity-norm penalty compiled from a hierarchy graph.

    The graph must be a tree unless ``allow_dag`` is set; the tracer itself
    handles any overlap pattern.
    """
    if not allow_dag and not graph.is_tree():
        raise NotATree("hiCAP needs a tree hierarchy (pass allow_dag=True for general DAGs)")
    grouping = compile_penalty(graph, math.inf, weights, p=dataset.p)
    path = _Tracer(dataset, grouping, max_steps, stop_df, "hicap").run()
    path.config = {"groups": [list(g) for g in grouping.groups]}
    return path
