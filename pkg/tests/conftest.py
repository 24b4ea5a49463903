import numpy as np
import pytest

from seedstream.graphs import DynGraph
from seedstream.probmodels import HyperparamModel


def build_graph(n, edges, feat_dim=1, features=None):
    """Graph with nodes 0..n-1; `features` maps node -> vector (default all ones,
    which makes the linear model's edge probability equal theta.sum())."""
    g = DynGraph(feat_dim)
    for v in range(n):
        f = features[v] if features is not None else [1.0] * feat_dim
        g.add_node(v, f)
    for (u, v) in edges:
        g.add_edge(u, v)
    g.n0 = g.n
    g.m0 = g.m
    return g


def const_prob_setup(p):
    """(model, theta) giving every all-ones-feature edge probability exactly p."""
    model = HyperparamModel("linear", 2)
    return model, np.array([p / 2.0, p / 2.0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
