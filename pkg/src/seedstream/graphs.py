"""Directed dynamic graph with per-node features, plus the text file formats.

Graph file layout (line oriented):

    n m d
    node <id> <f_1> ... <f_{d/2}>     (n lines)
    edge <u> <v>                      (m lines)

Update stream, one update per line:

    +n <id> <f_1> ... <f_{d/2}>
    +e <u> <v>
    -n <id>
    -e <u> <v>
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass

import numpy as np


class GraphUpdateError(ValueError):
    """An update violates its precondition against the current graph."""


@dataclass(frozen=True)
class InsertNode:
    node: int
    features: tuple


@dataclass(frozen=True)
class InsertEdge:
    source: int
    target: int


@dataclass(frozen=True)
class RemoveNode:
    node: int


@dataclass(frozen=True)
class RemoveEdge:
    source: int
    target: int


Update = InsertNode | InsertEdge | RemoveNode | RemoveEdge


class DynGraph:
    """Simple directed graph: no self-loops, no parallel edges.

    Adjacency lists are kept sorted by node id so traversal order is
    deterministic.  `n0`/`m0` are size snapshots managed by the caller
    (the engine rebases them on every restart).
    """

    def __init__(self, feat_dim: int):
        if feat_dim < 1:
            raise ValueError("feat_dim must be >= 1")
        self.feat_dim = feat_dim  # per-node feature length (d/2)
        self.features: dict[int, np.ndarray] = {}
        self.in_adj: dict[int, list[int]] = {}
        self.out_adj: dict[int, list[int]] = {}
        self.edges: set[tuple[int, int]] = set()
        self.m = 0
        self.n0 = 0
        self.m0 = 0

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def edge_dim(self) -> int:
        return 2 * self.feat_dim

    def node_ids(self) -> list[int]:
        return sorted(self.features)

    def has_node(self, v) -> bool:
        return v in self.features

    def has_edge(self, u, v) -> bool:
        return (u, v) in self.edges

    def in_neighbors(self, v) -> list[int]:
        return self.in_adj[v]

    def out_neighbors(self, v) -> list[int]:
        return self.out_adj[v]

    def add_node(self, v: int, features) -> None:
        if v < 0:
            raise GraphUpdateError(f"node ids must be nonnegative, got {v}")
        if v in self.features:
            raise GraphUpdateError(f"node {v} already present")
        feats = np.asarray(features, dtype=float)
        if feats.shape != (self.feat_dim,):
            raise GraphUpdateError(
                f"node {v}: expected {self.feat_dim} features, got {feats.shape}"
            )
        if np.any(np.abs(feats) > 1.0 + 1e-12):
            raise GraphUpdateError(f"node {v}: features must lie in [-1, 1]")
        self.features[v] = feats
        self.in_adj[v] = []
        self.out_adj[v] = []

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise GraphUpdateError(f"self-loop ({u},{v}) rejected")
        if u not in self.features or v not in self.features:
            raise GraphUpdateError(f"edge ({u},{v}): endpoint not present")
        if (u, v) in self.edges:
            raise GraphUpdateError(f"edge ({u},{v}) already present")
        self.edges.add((u, v))
        insort(self.out_adj[u], v)
        insort(self.in_adj[v], u)
        self.m += 1

    def remove_edge(self, u: int, v: int) -> None:
        if (u, v) not in self.edges:
            raise GraphUpdateError(f"edge ({u},{v}) not present")
        self.edges.remove((u, v))
        self.out_adj[u].remove(v)
        self.in_adj[v].remove(u)
        self.m -= 1

    def remove_node(self, v: int) -> list[tuple[int, int]]:
        """Remove `v` and all incident edges; returns the removed edges."""
        if v not in self.features:
            raise GraphUpdateError(f"node {v} not present")
        incident = [(u, v) for u in self.in_adj[v]] + [(v, w) for w in self.out_adj[v]]
        for u, w in incident:
            self.remove_edge(u, w)
        del self.features[v]
        del self.in_adj[v]
        del self.out_adj[v]
        return incident

    def copy(self) -> "DynGraph":
        g = DynGraph(self.feat_dim)
        g.features = {v: f.copy() for v, f in self.features.items()}
        g.in_adj = {v: list(a) for v, a in self.in_adj.items()}
        g.out_adj = {v: list(a) for v, a in self.out_adj.items()}
        g.edges = set(self.edges)
        g.m = self.m
        g.n0 = self.n0
        g.m0 = self.m0
        return g


def apply_update(g: DynGraph, u: Update) -> None:
    """Mutate `g` in place; raises GraphUpdateError on any precondition breach."""
    if isinstance(u, InsertNode):
        g.add_node(u.node, u.features)
    elif isinstance(u, InsertEdge):
        g.add_edge(u.source, u.target)
    elif isinstance(u, RemoveNode):
        g.remove_node(u.node)
    elif isinstance(u, RemoveEdge):
        g.remove_edge(u.source, u.target)
    else:
        raise TypeError(f"not an update: {u!r}")


def inverse_update(g: DynGraph, u: Update) -> Update:
    """The update that undoes `u` on the graph state *before* applying it.

    Node removal is not invertible by a single update once the node has
    incident edges, so only degree-0 nodes are accepted there.
    """
    if isinstance(u, InsertNode):
        return RemoveNode(u.node)
    if isinstance(u, InsertEdge):
        return RemoveEdge(u.source, u.target)
    if isinstance(u, RemoveEdge):
        return InsertEdge(u.source, u.target)
    if isinstance(u, RemoveNode):
        if g.in_adj[u.node] or g.out_adj[u.node]:
            raise GraphUpdateError("cannot invert removal of a node with edges")
        return InsertNode(u.node, tuple(float(x) for x in g.features[u.node]))
    raise TypeError(f"not an update: {u!r}")


# -- text formats -----------------------------------------------------------


def _fmt_feats(feats) -> str:
    return " ".join(repr(float(x)) for x in feats)


def save_graph(g: DynGraph, path) -> None:
    lines = [f"{g.n} {g.m} {g.edge_dim}"]
    for v in g.node_ids():
        lines.append(f"node {v} {_fmt_feats(g.features[v])}")
    for u, v in sorted(g.edges):
        lines.append(f"edge {u} {v}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> DynGraph:
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip()]
    if not tokens:
        raise ValueError(f"{path}: empty graph file")
    header = tokens[0]
    if len(header) != 3:
        raise ValueError(f"{path}: bad header {' '.join(header)!r}")
    n, m, d = (int(x) for x in header)
    if d % 2 != 0:
        raise ValueError(f"{path}: edge feature dimension {d} must be even")
    g = DynGraph(d // 2)
    rows = tokens[1:]
    if len(rows) != n + m:
        raise ValueError(f"{path}: expected {n + m} body lines, found {len(rows)}")
    for row in rows[:n]:
        if row[0] != "node" or len(row) != 2 + d // 2:
            raise ValueError(f"{path}: bad node line {' '.join(row)!r}")
        g.add_node(int(row[1]), [float(x) for x in row[2:]])
    for row in rows[n:]:
        if row[0] != "edge" or len(row) != 3:
            raise ValueError(f"{path}: bad edge line {' '.join(row)!r}")
        g.add_edge(int(row[1]), int(row[2]))
    g.n0 = g.n
    g.m0 = g.m
    return g


def update_to_line(u: Update) -> str:
    if isinstance(u, InsertNode):
        return f"+n {u.node} {_fmt_feats(u.features)}"
    if isinstance(u, InsertEdge):
        return f"+e {u.source} {u.target}"
    if isinstance(u, RemoveNode):
        return f"-n {u.node}"
    if isinstance(u, RemoveEdge):
        return f"-e {u.source} {u.target}"
    raise TypeError(f"not an update: {u!r}")


def update_from_line(line: str) -> Update:
    parts = line.split()
    if not parts:
        raise ValueError("empty update line")
    tag = parts[0]
    if tag == "+n":
        return InsertNode(int(parts[1]), tuple(float(x) for x in parts[2:]))
    if tag == "+e":
        return InsertEdge(int(parts[1]), int(parts[2]))
    if tag == "-n":
        return RemoveNode(int(parts[1]))
    if tag == "-e":
        return RemoveEdge(int(parts[1]), int(parts[2]))
    raise ValueError(f"bad update line {line!r}")


def save_stream(updates, path) -> None:
    with open(path, "w") as fh:
        for u in updates:
            fh.write(update_to_line(u) + "\n")


def load_stream(path) -> list[Update]:
    with open(path) as fh:
        return [update_from_line(ln) for ln in fh if ln.strip()]
