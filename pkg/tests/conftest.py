import os

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from triadlab.generators import build_family
from triadlab.graph import build_graph

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def nx_distances(g):
    """All-pairs hop distances from networkx, as an independent oracle."""
    h = nx.Graph()
    h.add_nodes_from(range(g.node_count))
    h.add_edges_from(g.edges)
    out = np.zeros((g.node_count, g.node_count), dtype=np.int64)
    for src, row in nx.all_pairs_shortest_path_length(h):
        for dst, d in row.items():
            out[src, dst] = d
    return out


def from_nx(h):
    mapping = {v: i for i, v in enumerate(sorted(h.nodes()))}
    return build_graph([(mapping[a], mapping[b]) for a, b in h.edges()], h.number_of_nodes())


@pytest.fixture
def path11():
    return build_family("path", {"length": 11})


@pytest.fixture
def grid3():
    return build_family("grid", {"size": 3})


@pytest.fixture
def square():
    return build_family("cycle", {"length": 4})


@pytest.fixture
def triangle():
    return build_family("complete", {"size": 3})


MEDIAN_FAMILIES = [
    ("path", {"length": 7}),
    ("grid", {"size": 4}),
    ("grid", {"size": 3, "dims": 3}),
    ("tree", {"branching": 2, "height": 3}),
    ("tree", {"branching": 3, "height": 2}),
    ("star", {"leaves": 6}),
    ("hypercube", {"dimension": 3}),
    ("cycle", {"length": 4}),
]

NON_MEDIAN_FAMILIES = [
    ("cycle", {"length": 5}),
    ("cycle", {"length": 6}),
    ("complete", {"size": 3}),
    ("complete", {"size": 5}),
    ("explicit", {"nodes": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]]}),
]
