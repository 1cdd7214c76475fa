"""Metric and median-graph machinery on unweighted, undirected, connected graphs.

Nodes are dense integers ``0..node_count-1``. Node sets are ``frozenset[int]``.
All-pairs hop distances are computed once at construction and kept as a
read-only ``int32`` matrix; every operation below is distance driven.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import _backend
from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    EmptySet,
    InvalidNode,
    NoGate,
    NotAnEdge,
    NotConvex,
    NotMedianGraph,
    SelfLoop,
)

NodeSet = frozenset


class OpinionGraph:
    """Immutable connected simple graph with cached all-pairs distances."""

    def __init__(self, node_count: int, edges: Sequence[tuple[int, int]]):
        self.node_count = node_count
        self.edges = tuple(edges)
        nbrs: list[list[int]] = [[] for _ in range(node_count)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.adjacency = tuple(tuple(sorted(a)) for a in nbrs)
        degrees = np.array([len(a) for a in self.adjacency], dtype=np.int64)
        self.indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(degrees, out=self.indptr[1:])
        self.indices = np.array(
            [v for a in self.adjacency for v in a], dtype=np.int32
        ).reshape(-1)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False

        if node_count == 1:
            dist = np.zeros((1, 1), dtype=np.int32)
        else:
            mat = csr_matrix(
                (np.ones(self.indices.shape[0]), self.indices, self.indptr),
                shape=(node_count, node_count),
            )
            raw = shortest_path(mat, method="D", unweighted=True, directed=False)
            if np.isinf(raw).any():
                raise DisconnectedGraph("graph is not connected")
            dist = np.ascontiguousarray(raw, dtype=np.int32)
        dist.flags.writeable = False
        self.dist = dist

    def __repr__(self) -> str:
        return f"OpinionGraph(node_count={self.node_count}, edges={len(self.edges)})"

    def __len__(self) -> int:
        return self.node_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, x: int) -> tuple[int, ...]:
        return self.adjacency[x]

    def has_edge(self, u: int, v: int) -> bool:
        return 0 <= u < self.node_count and 0 <= v < self.node_count and self.dist[u, v] == 1

    def d(self, x: int, y: int) -> int:
        return int(self.dist[x, y])

    def check_node(self, x: int) -> int:
        if not 0 <= x < self.node_count:
            raise InvalidNode(f"node {x} not in [0, {self.node_count})")
        return int(x)

    @cached_property
    def is_median(self) -> bool:
        return _backend.first_bad_triple(self.dist) is None

    @cached_property
    def is_path(self) -> bool:
        """True when the graph is a simple path (every interval is itself a path)."""
        if self.node_count == 1:
            return True
        deg = np.diff(self.indptr)
        return len(self.edges) == self.node_count - 1 and int(deg.max()) <= 2


def build_graph(edge_list: Iterable[Sequence[int]], node_count: int) -> OpinionGraph:
    """Validate an edge list and build the graph with BFS distances."""
    if node_count < 1:
        raise InvalidNode("node_count must be positive")
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    for e in edge_list:
        u, v = int(e[0]), int(e[1])
        for x in (u, v):
            if not 0 <= x < node_count:
                raise InvalidNode(f"node {x} not in [0, {node_count})")
        if u == v:
            raise SelfLoop(f"self-loop at {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen.add(key)
        edges.append(key)
    return OpinionGraph(node_count, edges)


def _mask_to_set(mask: np.ndarray) -> NodeSet:
    return frozenset(int(i) for i in np.flatnonzero(mask))


def interval_mask(g: OpinionGraph, x: int, y: int) -> np.ndarray:
    return g.dist[x] + g.dist[y] == g.dist[x, y]


def interval(g: OpinionGraph, x: int, y: int) -> NodeSet:
    """All nodes on some shortest x-y path."""
    g.check_node(x)
    g.check_node(y)
    return _mask_to_set(interval_mask(g, x, y))


def _nonempty(g: OpinionGraph, s: Iterable[int]) -> list[int]:
    nodes = sorted({g.check_node(int(x)) for x in s})
    if not nodes:
        raise EmptySet("node set is empty")
    return nodes


def is_convex(g: OpinionGraph, s: Iterable[int]) -> bool:
    nodes = _nonempty(g, s)
    member = np.zeros(g.node_count, dtype=bool)
    member[nodes] = True
    for x, y in combinations(nodes, 2):
        if (interval_mask(g, x, y) & ~member).any():
            return False
    return True


def convex_hull(g: OpinionGraph, s: Iterable[int]) -> NodeSet:
    """Least convex superset, by closing under pairwise intervals until nothing changes."""
    nodes = _nonempty(g, s)
    member = np.zeros(g.node_count, dtype=bool)
    member[nodes] = True
    frontier = list(nodes)
    while frontier:
        current = np.flatnonzero(member)
        added = np.zeros(g.node_count, dtype=bool)
        for x in frontier:
            # nodes between x and any current member
            within = (g.dist[x][None, :] + g.dist[current]) == g.dist[x, current][:, None]
            added |= within.any(axis=0)
        added &= ~member
        member |= added
        frontier = [int(i) for i in np.flatnonzero(added)]
    return _mask_to_set(member)


def gate(g: OpinionGraph, s: Iterable[int], x: int) -> int:
    """The node of convex ``s`` through which some shortest path from ``x`` to every member passes."""
    nodes = _nonempty(g, s)
    g.check_node(x)
    if not is_convex(g, nodes):
        raise NotConvex("gate requires a convex set")
    idx = np.array(nodes)
    dx = g.dist[x, idx]
    for cand in idx[dx == dx.min()]:
        if np.all(g.dist[x, cand] + g.dist[cand, idx] == dx):
            return int(cand)
    raise NoGate(f"no gate for node {x}; graph is not a median graph")


@dataclass(frozen=True)
class EdgeCut:
    edge: tuple[int, int]
    side_u: NodeSet
    side_v: NodeSet

    def separates(self, x: int, y: int) -> bool:
        return (x in self.side_u and y in self.side_v) or (x in self.side_v and y in self.side_u)

    def side_of(self, x: int) -> NodeSet:
        if x in self.side_u:
            return self.side_u
        if x in self.side_v:
            return self.side_v
        raise KeyError(x)


@dataclass(frozen=True)
class ThetaDecomposition:
    cuts: tuple[EdgeCut, ...]

    def __len__(self) -> int:
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def separating(self, x: int, y: int) -> list[EdgeCut]:
        return [c for c in self.cuts if c.separates(x, y)]


def win_sets(g: OpinionGraph, e: Sequence[int]) -> EdgeCut:
    """Nodes strictly closer to u, and strictly closer to v, across edge (u, v)."""
    u, v = int(e[0]), int(e[1])
    if not g.has_edge(u, v):
        raise NotAnEdge(f"({u}, {v}) is not an edge")
    du, dv = g.dist[:, u], g.dist[:, v]
    return EdgeCut((u, v), _mask_to_set(du < dv), _mask_to_set(dv < du))


def theta_decomposition(g: OpinionGraph) -> ThetaDecomposition:
    """One cut per distinct win-set partition, keyed by the side holding node 0."""
    cuts: dict[NodeSet, EdgeCut] = {}
    for u, v in g.edges:
        cut = win_sets(g, (u, v))
        if len(cut.side_u) + len(cut.side_v) != g.node_count:
            raise NotMedianGraph(f"edge ({u}, {v}) does not partition the nodes")
        key = cut.side_of(0)
        if key not in cuts:
            cuts[key] = cut
    return ThetaDecomposition(tuple(cuts.values()))


def _argmin_set(values: np.ndarray) -> NodeSet:
    return _mask_to_set(values == values.min())


def median_of_three(g: OpinionGraph, x: int, y: int, z: int) -> NodeSet:
    """Every minimiser of d(u,x) + d(u,y) + d(u,z) over all nodes u."""
    for a in (x, y, z):
        g.check_node(a)
    return _argmin_set(g.dist[x].astype(np.int64) + g.dist[y] + g.dist[z])


def canonical_median(g: OpinionGraph, x: int, y: int, z: int) -> int:
    """Lowest-id minimiser; equals the unique median on median graphs."""
    return min(median_of_three(g, x, y, z))


def triple_intersection(g: OpinionGraph, x: int, y: int, z: int) -> NodeSet:
    return _mask_to_set(interval_mask(g, x, y) & interval_mask(g, x, z) & interval_mask(g, y, z))


def is_median_graph(g: OpinionGraph) -> bool:
    """Every triple's three pairwise intervals share exactly one node."""
    return g.is_median


def first_non_median_triple(g: OpinionGraph) -> tuple[int, int, int] | None:
    return _backend.first_bad_triple(g.dist)


def _as_counts(g: OpinionGraph, s: Iterable[int] | Mapping[int, int]) -> np.ndarray:
    counts = np.zeros(g.node_count, dtype=np.int64)
    if isinstance(s, Mapping):
        for node, c in s.items():
            counts[g.check_node(int(node))] += int(c)
    else:
        for node in s:
            counts[g.check_node(int(node))] += 1
    return counts


def _beats(g: OpinionGraph, support: np.ndarray, weight: np.ndarray, x: int, ys: np.ndarray) -> np.ndarray:
    """For each y in ``ys``: strict-majority preference for x over y (equidistant voters abstain)."""
    dx = g.dist[support, x][:, None]
    dy = g.dist[np.ix_(support, ys)]
    for_x = ((dx < dy) * weight[:, None]).sum(axis=0)
    for_y = ((dy < dx) * weight[:, None]).sum(axis=0)
    return for_x > for_y


def condorcet_winner(g: OpinionGraph, s: Iterable[int] | Mapping[int, int]) -> int | None:
    """Node beating every other node in pairwise majority over the multiset ``s``, if any."""
    counts = _as_counts(g, s)
    if counts.sum() == 0:
        raise EmptySet("empty voter multiset")
    support = np.flatnonzero(counts)
    weight = counts[support]
    everyone = np.arange(g.node_count)
    for x in range(g.node_count):
        # beating all neighbours is necessary and cheap to test first
        nbrs = np.asarray(g.adjacency[x], dtype=np.int64)
        if nbrs.size and not _beats(g, support, weight, x, nbrs).all():
            continue
        others = everyone[everyone != x]
        if others.size == 0 or _beats(g, support, weight, x, others).all():
            return x
    return None


@dataclass(frozen=True)
class OpinionProfile:
    """Multiset of participant opinions; ``counts[v]`` participants sit at node ``v``."""

    graph: OpinionGraph
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.graph.node_count,):
            raise ValueError("counts must have one entry per node")
        if (counts < 0).any():
            raise ValueError("negative multiplicity")
        if counts.sum() < 1:
            raise ValueError("profile needs at least one participant")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(cls, graph: OpinionGraph, count_at: Mapping[int, int]) -> "OpinionProfile":
        return cls(graph, _as_counts(graph, count_at))

    @classmethod
    def from_opinions(cls, graph: OpinionGraph, opinions: Iterable[int]) -> "OpinionProfile":
        return cls(graph, _as_counts(graph, opinions))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def count_at(self, x: int) -> int:
        return int(self.counts[x])

    def opinions(self) -> np.ndarray:
        """Participant opinions x_1..x_n, grouped by node in increasing order."""
        return np.repeat(np.arange(self.graph.node_count), self.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OpinionProfile):
            return NotImplemented
        return self.graph is other.graph and np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash((id(self.graph), self.counts.tobytes()))


def distance_sums(g: OpinionGraph, p: OpinionProfile) -> np.ndarray:
    """D(x) for every node x at once."""
    return g.dist.astype(np.int64) @ p.counts


def total_distance(g: OpinionGraph, p: OpinionProfile, x: int) -> int:
    g.check_node(x)
    return int(g.dist[x].astype(np.int64) @ p.counts)


def generalized_median(g: OpinionGraph, p: OpinionProfile) -> tuple[NodeSet, int]:
    """All minimisers of D together with the minimum cost D(x*)."""
    d = distance_sums(g, p)
    return _argmin_set(d), int(d.min())
