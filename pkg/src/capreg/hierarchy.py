"""Hierarchies as directed graphs over predictor groups, and their CAP groupings.

A node carries a set of predictor indices; an edge ``a -> b`` says node ``a``
must enter the model before node ``b``.  Compiling the graph gives one group
per node holding the node's indices together with every descendant's.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from pathlib import Path

import networkx as nx
import numpy as np

from .core import Grouping, format_norm, parse_norm
from .errors import CyclicGraph, IndexOutOfRange, InvalidGrouping, InvalidNorm, InvalidShape, UnknownIndex


@dataclass(frozen=True)
class HierarchyGraph:
    nodes: tuple
    edges: tuple = ()

    def __post_init__(self):
        nodes = tuple(tuple(int(j) for j in nd) for nd in self.nodes)
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        seen = set()
        for m, nd in enumerate(nodes):
            if not nd:
                raise InvalidGrouping(f"node {m} has no predictors")
            if seen.intersection(nd) or len(set(nd)) != len(nd):
                raise InvalidGrouping(f"node {m} shares predictors with another node")
            if min(nd) < 0:
                raise IndexOutOfRange(f"node {m} has a negative index")
            seen.update(nd)
        for a, b in edges:
            if not (0 <= a < len(nodes) and 0 <= b < len(nodes)):
                raise IndexOutOfRange(f"edge ({a}, {b}) refers to a missing node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if not nx.is_directed_acyclic_graph(self.digraph):
            raise CyclicGraph("hierarchy graph has a cycle")

    @cached_property
    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(len(self.nodes)))
        g.add_edges_from(self.edges)
        return g

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_of(self) -> dict:
        return {j: m for m, nd in enumerate(self.nodes) for j in nd}

    def is_tree(self) -> bool:
        return all(self.digraph.in_degree(m) <= 1 for m in range(self.n_nodes))

    def parents(self, m) -> list:
        return sorted(self.digraph.predecessors(m))

    def children(self, m) -> list:
        return sorted(self.digraph.successors(m))

    def descendants(self, m) -> set:
        return nx.descendants(self.digraph, m)

    def ancestors(self, m) -> set:
        return nx.ancestors(self.digraph, m)

    def subtree_indices(self, m) -> list:
        out = list(self.nodes[m])
        for d in sorted(self.descendants(m)):
            out.extend(self.nodes[d])
        return sorted(out)

    def to_dict(self, gamma=None, weights=None) -> dict:
        d = {"nodes": [list(nd) for nd in self.nodes], "edges": [list(e) for e in self.edges]}
        if gamma is not None:
            d["gamma"] = [format_norm(g) for g in gamma]
        if weights is not None:
            d["weights"] = list(weights)
        return d

    @classmethod
    def from_dict(cls, data: dict):
        """Return ``(graph, gamma, weights)`` from the hierarchy JSON layout."""
        if not isinstance(data, dict) or "nodes" not in data:
            raise InvalidGrouping("field 'nodes' is missing")
        graph = cls(tuple(map(tuple, data["nodes"])), tuple(map(tuple, data.get("edges", []))))
        gamma = [parse_norm(g) for g in data.get("gamma", ["inf"] * graph.n_nodes)]
        weights = data.get("weights", [1.0] * graph.n_nodes)
        return graph, gamma, weights

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def compile_penalty(graph: HierarchyGraph, gamma=math.inf, weights=None, p: int | None = None) -> Grouping:
    """One group per node: the node's indices plus all descendants' indices.

    Predictors outside every node get a singleton infinity-norm group.
    """
    m = graph.n_nodes
    gamma = [parse_norm(gamma)] * m if np.isscalar(gamma) or isinstance(gamma, str) else [parse_norm(g) for g in gamma]
    weights = [1.0] * m if weights is None else [float(w) for w in weights]
    if len(gamma) != m or len(weights) != m:
        raise InvalidGrouping("gamma and weights need one entry per node")
    if any(g <= 1.0 for g in gamma):
        raise InvalidNorm("hierarchical groups need norms strictly above 1")
    covered = set(graph.node_of)
    p = max(covered) + 1 if p is None else p
    if max(covered) >= p:
        raise IndexOutOfRange(f"node index {max(covered)} out of range for p={p}")
    groups = [tuple(graph.subtree_indices(k)) for k in range(m)]
    norms, wts = list(gamma), list(weights)
    for j in range(p):
        if j not in covered:
            groups.append((j,))
            norms.append(math.inf)
            wts.append(1.0)
    return Grouping(tuple(groups), tuple(norms), 1.0, tuple(wts), p=p)


def validate_theorem1(grouping: Grouping, i1, i2) -> bool:
    """True when the grouping guarantees ``i1`` is unpenalized once ``i2`` is nonzero.

    Conditions: outer norm 1 with every group norm above 1; every group
    containing ``i1`` also contains ``i2``; some group contains ``i2`` but not ``i1``.
    """
    i1, i2 = set(i1), set(i2)
    if grouping.overall_norm != 1.0 or any(g <= 1.0 for g in grouping.group_norms):
        return False
    sets = [set(g) for g in grouping.groups]
    if any(i1 <= g and not i2 <= g for g in sets):
        return False
    return any(i2 <= g and not i1 <= g for g in sets)


def anova_pairs(d: int) -> list:
    return list(combinations(range(d), 2))


def build_anova_graph(d: int) -> HierarchyGraph:
    """Main effects 0..d-1 followed by pairwise interactions in lexicographic order."""
    if d < 2:
        raise InvalidShape("ANOVA hierarchy needs d >= 2")
    pairs = anova_pairs(d)
    nodes = [(i,) for i in range(d)] + [(d + k,) for k in range(len(pairs))]
    edges = []
    for k, (i, j) in enumerate(pairs):
        edges += [(i, d + k), (j, d + k)]
    return HierarchyGraph(tuple(nodes), tuple(edges))


def anova_design(z: np.ndarray) -> np.ndarray:
    """Columns ``[z_1..z_d, z_i*z_j for i<j]`` matching :func:`build_anova_graph`."""
    z = np.asarray(z, dtype=float)
    inter = [z[:, i] * z[:, j] for i, j in anova_pairs(z.shape[1])]
    return np.column_stack([z] + inter)


def haar_value(level: int, pos: int, t):
    """Haar wavelet at ``(level, pos)``: -1 on the left half of its support, +1 on the right.

    Intervals are left-closed, right-open.
    """
    t = np.asarray(t, dtype=float)
    width = 2.0 ** -(level + 1)
    a = 2 * pos * width
    out = np.zeros_like(t)
    out[(t >= a) & (t < a + width)] = -1.0
    out[(t >= a + width) & (t < a + 2 * width)] = 1.0
    return out


def build_haar_tree(levels: int, time_points: int):
    """Binary-tree hierarchy over Haar wavelets and their design matrix.

    Column ``2**i - 1 + j`` holds wavelet ``(i, j)`` sampled at the midpoints
    ``(k + 0.5) / time_points``; its parent is ``(i - 1, j // 2)``.
    """
    if levels < 1 or time_points < 2 or time_points & (time_points - 1) or time_points < 2**levels:
        raise InvalidShape("time_points must be a power of two and at least 2**levels")
    t = (np.arange(time_points) + 0.5) / time_points
    cols, nodes, edges = [], [], []
    for i in range(levels):
        for j in range(2**i):
            k = 2**i - 1 + j
            cols.append(haar_value(i, j, t))
            nodes.append((k,))
            if i > 0:
                edges.append((2 ** (i - 1) - 1 + j // 2, k))
    return HierarchyGraph(tuple(nodes), tuple(edges)), np.column_stack(cols)


def ancestral_closure(selected, graph: HierarchyGraph) -> set:
    out = set()
    for j in selected:
        if j not in graph.node_of:
            raise UnknownIndex(f"index {j} belongs to no hierarchy node")
        out.add(j)
        for a in graph.ancestors(graph.node_of[j]):
            out.update(graph.nodes[a])
    return out


def hierarchy_gap(selected, graph: HierarchyGraph) -> int:
    """Number of predictors that must be added so every selected one has its ancestors."""
    selected = set(int(j) for j in selected)
    return len(ancestral_closure(selected, graph) - selected)
