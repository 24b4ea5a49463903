"""Bipartite coverage state for one sampled hyperparameter.

Each sampled theta_i owns two independent collections of RR sets over the
same generation rate: the coverage copy (`cv`) backs the spread estimator
and seed selection, the estimation copy (`est`) is consulted only for the
edge-scan budget that triggers full rebuilds.  Handles (right-side vertices)
carry stable integer ids; deleted handles are tombstoned in place so ids
never shift mid-run.

The membership index is kept in both directions (node -> handles and
handle -> nodes).  Callers driving incremental seed state can defer index
materialization and apply the returned events one at a time, which is how
the engine interleaves seed updates with coverage changes.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass

import numpy as np

from .rrsets import (
    RRSet,
    RateEstimate,
    audit_rr_set,
    augment_rr_probe,
    drop_dead_record,
    make_theta_probe,
    remove_node_from_rr_set,
    reduce_rr_set,
    sample_rr_probe,
)


class CoverageGraph:
    """One copy (est or cv): RR-set handles plus the membership index."""

    def __init__(self):
        self.handles: list[RRSet | None] = []
        self.node_index: dict[int, list[int]] = {}
        self.handle_members: dict[int, list[int]] = {}
        self.root_index: dict[int, list[int]] = {}
        self.left: set[int] = set()
        self.alive = 0

    def add_handle(self, rr: RRSet, index_members: bool = True) -> int:
        hid = len(self.handles)
        self.handles.append(rr)
        self.root_index.setdefault(rr.root, []).append(hid)
        self.handle_members[hid] = []
        if index_members:
            for u in rr.member_array():
                u = int(u)
                self.node_index.setdefault(u, []).append(hid)
                self.handle_members[hid].append(u)
        self.alive += 1
        return hid

    def drop_handle(self, hid: int) -> list[int]:
        """Tombstone the handle; returns its materialized member list."""
        rr = self.handles[hid]
        members = self.handle_members.pop(hid)
        for u in members:
            self.node_index[u].remove(hid)
        self.root_index[rr.root].remove(hid)
        self.handles[hid] = None
        self.alive -= 1
        return members

    def add_membership(self, hid: int, node: int) -> None:
        insort(self.node_index.setdefault(node, []), hid)
        insort(self.handle_members[hid], node)

    def remove_membership(self, hid: int, node: int) -> None:
        self.node_index[node].remove(hid)
        self.handle_members[hid].remove(node)

    def handles_containing(self, node: int) -> list[int]:
        return self.node_index.get(node, [])

    def handles_rooted(self, node: int) -> list[int]:
        return self.root_index.get(node, [])

    def alive_handles(self):
        for hid, rr in enumerate(self.handles):
            if rr is not None:
                yield hid, rr

    def bipartite_edge_count(self) -> int:
        return sum(len(m) for m in self.handle_members.values())


@dataclass
class CoveragePair:
    index: int
    theta: np.ndarray
    rate: RateEstimate
    est: CoverageGraph
    cv: CoverageGraph
    probe: object
    est_edges_scanned: int = 0

    @property
    def scale(self) -> float:
        """Normalizer n0 / K_i applied to raw coverage counts."""
        if self.rate.num_sets == 0:
            return 0.0
        return self.rate.n0 / self.rate.num_sets


def _attach_copies(graph, whole, frac, probe, rng, cov: CoverageGraph, root: int,
                   index_members: bool):
    draws = whole + (1 if frac > 0.0 and rng.random() < frac else 0)
    for _ in range(draws):
        cov.add_handle(sample_rr_probe(graph, probe, root, rng), index_members)


def build_coverage_pair(g, theta, rate: RateEstimate, rng, model=None, index: int = 0,
                        probe=None, defer_index: bool = False) -> CoveragePair:
    """Attach floor(p_i) RR sets per node with certainty plus one more with
    probability frac(p_i), independently for the est and cv copies.

    With `defer_index` the cv membership index starts empty so the caller
    can replay the bipartite edges one at a time (the est index is always
    materialized immediately).
    """
    if probe is None:
        probe = make_theta_probe(g, model, theta)
    p = rate.rate
    whole = int(p)
    frac = p - whole
    est, cv = CoverageGraph(), CoverageGraph()
    for v in g.node_ids():
        est.left.add(v)
        cv.left.add(v)
        _attach_copies(g, whole, frac, probe, rng, est, v, True)
        _attach_copies(g, whole, frac, probe, rng, cv, v, not defer_index)
    return CoveragePair(index, np.asarray(theta, dtype=float), rate, est, cv, probe)


def f_cv(pair: CoveragePair, seeds) -> float:
    """Coverage estimate of the spread of `seeds` under this pair's theta."""
    scale = pair.scale
    if scale == 0.0:
        return 0.0
    covered: set[int] = set()
    for v in seeds:
        covered.update(pair.cv.handles_containing(v))
    return scale * len(covered)


def on_insert_node(pair: CoveragePair, v: int, rng) -> tuple[list[int], list[int]]:
    """New left node plus singleton-handle lotteries; returns the new handle
    ids (est, cv)."""
    p = pair.rate.rate
    whole = int(p)
    frac = p - whole
    new_ids = []
    for cov in (pair.est, pair.cv):
        cov.left.add(v)
        ids = []
        draws = whole + (1 if frac > 0.0 and rng.random() < frac else 0)
        for _ in range(draws):
            ids.append(cov.add_handle(RRSet(v, {v}, [], [])))
        new_ids.append(ids)
    return new_ids[0], new_ids[1]


def _augment_copy(cov: CoverageGraph, g, edge, probe, rng, budget=None, start=0,
                  defer=False):
    """Augment every eligible handle containing the edge target; returns
    (events ordered by (handle, node), edge checks, tripped-budget flag)."""
    u, v = edge
    events: list[tuple[int, int]] = []
    checked = 0
    for hid in list(cov.handles_containing(v)):
        rr = cov.handles[hid]
        if rr.contains(u) or rr.has_decided(u, v):
            continue
        added, delta = augment_rr_probe(rr, g, edge, probe, rng)
        checked += delta
        for w in sorted(added):
            if not defer:
                cov.add_membership(hid, w)
            events.append((w, hid))
        if budget is not None and start + checked >= budget:
            return events, checked, True
    return events, checked, False


def _reduce_copy(cov: CoverageGraph, g, edge, budget=None, start=0, defer=False):
    u, v = edge
    events: list[tuple[int, int]] = []
    scanned = 0
    for hid in list(cov.handles_containing(v)):
        rr = cov.handles[hid]
        if rr.has_live(u, v):
            removed, delta = reduce_rr_set(rr, edge)
            scanned += delta
            for w in sorted(removed):
                if not defer:
                    cov.remove_membership(hid, w)
                events.append((w, hid))
            if budget is not None and start + scanned >= budget:
                return events, scanned, True
        else:
            # forget a dead memo for the vanished edge so a later
            # re-insertion of (u, v) gets a fresh coin
            drop_dead_record(rr, u, v)
    return events, scanned, False


def est_insert_edge(pair: CoveragePair, g, edge, rng, budget=None):
    _, checked, tripped = _augment_copy(pair.est, g, edge, pair.probe, rng,
                                        budget, pair.est_edges_scanned)
    pair.est_edges_scanned += checked
    return checked, tripped


def cv_insert_edge(pair: CoveragePair, g, edge, rng, defer=False):
    events, _, _ = _augment_copy(pair.cv, g, edge, pair.probe, rng, defer=defer)
    return events


def est_remove_edge(pair: CoveragePair, g, edge, budget=None):
    _, scanned, tripped = _reduce_copy(pair.est, g, edge, budget,
                                       pair.est_edges_scanned)
    pair.est_edges_scanned += scanned
    return scanned, tripped


def cv_remove_edge(pair: CoveragePair, g, edge, defer=False):
    events, _, _ = _reduce_copy(pair.cv, g, edge, defer=defer)
    return events


def on_insert_edge(pair: CoveragePair, g, edge, rng):
    """Both copies in one shot (est first); returns (new cv bipartite edges,
    est scan delta)."""
    delta, _ = est_insert_edge(pair, g, edge, rng)
    return cv_insert_edge(pair, g, edge, rng), delta


def on_remove_edge(pair: CoveragePair, g, edge):
    """Both copies (est first); returns (removed cv bipartite edges,
    est scan delta)."""
    delta, _ = est_remove_edge(pair, g, edge)
    return cv_remove_edge(pair, g, edge), delta


def _drop_node_from_copy(cov: CoverageGraph, v: int, removed_out_edges, observer=None):
    for hid in list(cov.handles_rooted(v)):
        members = cov.drop_handle(hid)
        if observer is not None:
            observer.handle_deleted(hid, members)
    for hid in list(cov.handles_containing(v)):
        rr = cov.handles[hid]
        removed = remove_node_from_rr_set(rr, v)
        for w in sorted(removed):
            cov.remove_membership(hid, w)
            if observer is not None:
                observer.membership_removed(w, hid)
    # stale source-side dead memos (v, w) live in handles that never held v
    for (_, w) in removed_out_edges:
        for hid in cov.handles_containing(w):
            drop_dead_record(cov.handles[hid], v, w)
    cov.left.discard(v)


def on_remove_node(pair: CoveragePair, v: int, removed_edges=(), observer=None) -> None:
    """Drop v from the left sets, delete handles rooted at v, and remove v
    (plus solely-dependent members) from every other handle.

    `removed_edges` are the graph edges that vanished with the node; their
    dead memos are scrubbed.  An optional observer sees every cv-side
    structural change, after the index has been updated.
    """
    out_edges = [(a, b) for (a, b) in removed_edges if a == v]
    _drop_node_from_copy(pair.est, v, out_edges)
    _drop_node_from_copy(pair.cv, v, out_edges, observer)


def audit_pair(pair: CoveragePair, g) -> None:
    """Structural audit: RR invariants plus exact index mirroring."""
    live_nodes = set(g.node_ids())
    for cov, name in ((pair.est, "est"), (pair.cv, "cv")):
        assert cov.left == live_nodes, f"{name}: left set out of sync"
        alive = 0
        for hid, rr in cov.alive_handles():
            alive += 1
            assert rr.root in live_nodes, f"{name}: handle {hid} rooted at dead node"
            audit_rr_set(rr, g)
            members = sorted(int(u) for u in rr.member_array())
            assert sorted(cov.handle_members[hid]) == members, \
                f"{name}: handle {hid} member index out of sync"
            for u in members:
                assert hid in cov.node_index.get(u, []), \
                    f"{name}: node index misses ({u}, {hid})"
            assert hid in cov.root_index.get(rr.root, []), f"{name}: root index misses {hid}"
        assert alive == cov.alive, f"{name}: alive count drifted"
        for v, hids in cov.node_index.items():
            assert len(set(hids)) == len(hids), f"{name}: duplicate index entries at {v}"
            for hid in hids:
                assert cov.handles[hid] is not None, f"{name}: index points at tombstone"
                assert v in cov.handle_members[hid], f"{name}: one-sided index entry"
