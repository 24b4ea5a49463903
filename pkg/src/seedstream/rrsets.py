"""Reverse-reachable sets with stored live-edge structure.

A reverse-reachable (RR) set is grown by reverse BFS from a root: every
incoming edge of a visited node is examined exactly once and declared live
with the edge's diffusion probability.  The live/dead outcome of every
examined edge is memoized on the set so later augmentation never re-flips a
decided edge, and the live-edge structure supports reduction when a graph
edge disappears.

Exploration order is fixed (FIFO over discovered nodes, in-neighbors in
ascending id order) so results are reproducible for a given rng state.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .probmodels import HyperparamModel, response

_SHIFT = 32
_MASK = (1 << _SHIFT) - 1


def encode_edge(u: int, v: int) -> int:
    return (u << _SHIFT) | v


def decode_edge(code: int) -> tuple[int, int]:
    return code >> _SHIFT, code & _MASK


class ContractError(ValueError):
    """An RR-set operation was invoked outside its stated precondition."""


def make_theta_probe(g, model: HyperparamModel, theta):
    """Edge-probability lookup p(u, v) = H(theta . [f_u, f_v]), memoizing the
    per-node half inner products."""
    from .probmodels import response_array

    theta = np.asarray(theta, dtype=float)
    h = model.dim // 2
    th_src, th_tgt = theta[:h], theta[h:]
    src_dot: dict[int, float] = {}
    tgt_dot: dict[int, float] = {}
    feats = g.features

    def probe(sources, target):
        b = tgt_dot.get(target)
        if b is None:
            b = tgt_dot[target] = float(th_tgt @ feats[target])
        inner = np.empty(len(sources))
        for i, u in enumerate(sources):
            a = src_dot.get(u)
            if a is None:
                a = src_dot[u] = float(th_src @ feats[u])
            inner[i] = a
        inner += b
        if len(inner) == 1:
            return np.array([response(model, float(inner[0]))])
        return response_array(model, inner)

    return probe


def make_prob_map_probe(probs: dict):
    """Probe backed by an explicit {(u, v): p} map."""

    def probe(sources, target):
        return np.array([probs[(u, target)] for u in sources], dtype=float)

    return probe


class RRSet:
    """One reverse-reachable sample rooted at `root`.

    Storage is compact (numpy arrays); the `members` / `live_edges` /
    `decided_dead` accessors materialize plain Python sets for callers that
    want them.
    """

    __slots__ = ("root", "_members", "_live", "_dead")

    def __init__(self, root, members, live_codes, dead_codes):
        self.root = root
        self._members = np.array(sorted(members), dtype=np.int64)
        self._live = np.array(live_codes, dtype=np.int64)
        self._dead = np.array(dead_codes, dtype=np.int64)

    @property
    def members(self) -> frozenset:
        return frozenset(int(x) for x in self._members)

    @property
    def live_edges(self) -> set:
        return {decode_edge(int(c)) for c in self._live}

    @property
    def decided_dead(self) -> set:
        return {decode_edge(int(c)) for c in self._dead}

    @property
    def edges_checked(self) -> int:
        return len(self._live) + len(self._dead)

    @property
    def size(self) -> int:
        return len(self._members)

    def member_array(self) -> np.ndarray:
        return self._members

    def contains(self, u) -> bool:
        i = np.searchsorted(self._members, u)
        return i < len(self._members) and self._members[i] == u

    def has_decided(self, u, v) -> bool:
        code = encode_edge(u, v)
        return bool((self._live == code).any() or (self._dead == code).any())

    def has_live(self, u, v) -> bool:
        return bool((self._live == encode_edge(u, v)).any())

    def __repr__(self):
        return f"RRSet(root={self.root}, size={self.size}, checked={self.edges_checked})"


def _explore(g, probe, rng, member_set, live, dead, queue, decided):
    """Shared reverse-BFS core; mutates all accumulator arguments."""
    checked = 0
    while queue:
        x = queue.popleft()
        pending = []
        codes = []
        for w in g.in_adj[x]:
            c = encode_edge(w, x)
            if c not in decided:
                pending.append(w)
                codes.append(c)
        if not pending:
            continue
        ps = probe(pending, x)
        coins = rng.random(len(pending))
        checked += len(pending)
        for w, c, p, coin in zip(pending, codes, ps, coins):
            decided.add(c)
            if coin < p:
                live.append(c)
                if w not in member_set:
                    member_set.add(w)
                    queue.append(w)
            else:
                dead.append(c)
    return checked


def sample_rr_probe(g, probe, root: int, rng) -> RRSet:
    member_set = {root}
    live: list[int] = []
    dead: list[int] = []
    _explore(g, probe, rng, member_set, live, dead, deque([root]), set())
    return RRSet(root, member_set, live, dead)


def sample_rr_set(g, theta, model: HyperparamModel, root: int, rng) -> RRSet:
    if not g.has_node(root):
        raise ContractError(f"root {root} not a live node")
    return sample_rr_probe(g, make_theta_probe(g, model, theta), root, rng)


@dataclass(frozen=True)
class RateEstimate:
    """How many RR sets fit in the edge-check budget: rate = num_sets / n0."""

    num_sets: int
    n0: int

    @property
    def rate(self) -> float:
        return self.num_sets / self.n0


def estimate_rate_probe(g, probe, R: float, m0: int, n0: int, rng) -> RateEstimate:
    if R <= 0:
        raise ValueError("R must be positive")
    if g.n == 0:
        raise ValueError("graph is empty")
    nodes = np.array(g.node_ids(), dtype=np.int64)
    if m0 <= 0:
        # edgeless snapshot: fall back to a fixed number of sets
        target_sets = math.ceil(R)
        for _ in range(target_sets):
            sample_rr_probe(g, probe, int(nodes[rng.integers(len(nodes))]), rng)
        return RateEstimate(target_sets, n0)
    budget = R * m0
    consumed = 0.0
    count = 0
    while consumed < budget:
        r = sample_rr_probe(g, probe, int(nodes[rng.integers(len(nodes))]), rng)
        # every set consumes at least one unit so edgeless regions cannot stall
        consumed += max(1, r.edges_checked)
        count += 1
    return RateEstimate(count, n0)


def estimate_generation_rate(g, theta, model: HyperparamModel, R: float, m0: int, n0: int, rng) -> RateEstimate:
    return estimate_rate_probe(g, make_theta_probe(g, model, theta), R, m0, n0, rng)


def augment_rr_probe(r: RRSet, g, edge, probe, rng) -> tuple[set, int]:
    u, v = edge
    if not g.has_edge(u, v):
        raise ContractError(f"edge {edge} not in graph")
    if not r.contains(v):
        raise ContractError(f"target {v} not a member")
    if r.contains(u):
        raise ContractError(f"source {u} already a member")
    code = encode_edge(u, v)
    if r.has_decided(u, v):
        raise ContractError(f"edge {edge} already decided for this RR set")

    p = float(probe([u], v)[0])
    if rng.random() >= p:
        r._dead = np.append(r._dead, code)
        return set(), 1

    decided = set(int(c) for c in r._live)
    decided.update(int(c) for c in r._dead)
    decided.add(code)
    member_set = set(int(x) for x in r._members)
    member_set.add(u)
    live = [code]
    dead: list[int] = []
    checked = 1 + _explore(g, probe, rng, member_set, live, dead, deque([u]), decided)
    added = member_set - set(int(x) for x in r._members)
    r._members = np.array(sorted(member_set), dtype=np.int64)
    r._live = np.concatenate([r._live, np.array(live, dtype=np.int64)])
    if dead:
        r._dead = np.concatenate([r._dead, np.array(dead, dtype=np.int64)])
    return added, checked


def augment_rr_set(r: RRSet, g, edge, theta, model: HyperparamModel, rng) -> tuple[set, int]:
    return augment_rr_probe(r, g, edge, make_theta_probe(g, model, theta), rng)


def _rebuild_from_live(r: RRSet, live_codes) -> set:
    """Recompute reverse reachability from the root over `live_codes`;
    shrink members and drop records whose endpoints fell out.  Returns the
    set of removed members."""
    by_target: dict[int, list[int]] = {}
    for c in live_codes:
        u, v = decode_edge(int(c))
        by_target.setdefault(v, []).append(u)
    reached = {r.root}
    queue = deque([r.root])
    while queue:
        x = queue.popleft()
        for w in by_target.get(x, ()):
            if w not in reached:
                reached.add(w)
                queue.append(w)
    removed = set(int(x) for x in r._members) - reached
    keep_live = [c for c in live_codes
                 if decode_edge(int(c))[0] in reached and decode_edge(int(c))[1] in reached]
    keep_dead = [int(c) for c in r._dead
                 if decode_edge(int(c))[0] not in removed and decode_edge(int(c))[1] not in removed]
    r._members = np.array(sorted(reached), dtype=np.int64)
    r._live = np.array(keep_live, dtype=np.int64)
    r._dead = np.array(keep_dead, dtype=np.int64)
    return removed


def reduce_rr_set(r: RRSet, edge) -> tuple[set, int]:
    u, v = edge
    code = encode_edge(u, v)
    if not (r._live == code).any():
        raise ContractError(f"edge {edge} is not live in this RR set")
    remaining = [int(c) for c in r._live if int(c) != code]
    removed = _rebuild_from_live(r, remaining)
    # rebuild touches every surviving live record once
    return removed, len(remaining)


def remove_node_from_rr_set(r: RRSet, x: int) -> set:
    if x == r.root:
        raise ContractError("root removal is handled by deleting the whole RR set")
    if not r.contains(x):
        return set()
    live = [int(c) for c in r._live
            if decode_edge(int(c))[0] != x and decode_edge(int(c))[1] != x]
    r._members = r._members[r._members != x]
    r._dead = np.array(
        [int(c) for c in r._dead
         if decode_edge(int(c))[0] != x and decode_edge(int(c))[1] != x],
        dtype=np.int64,
    )
    removed = _rebuild_from_live(r, live)
    removed.add(x)
    return removed


def drop_dead_record(r: RRSet, u: int, v: int) -> bool:
    """Forget the dead memo for (u, v), if present.  Used when the graph edge
    itself is removed so a future re-insertion gets a fresh coin."""
    code = encode_edge(u, v)
    mask = r._dead != code
    if mask.all():
        return False
    r._dead = r._dead[mask]
    return True


def audit_rr_set(r: RRSet, g=None) -> None:
    """Raise AssertionError if any structural invariant fails."""
    members = set(int(x) for x in r._members)
    assert r.root in members, "root missing from members"
    live = set(int(c) for c in r._live)
    dead = set(int(c) for c in r._dead)
    assert len(live) == len(r._live) and len(dead) == len(r._dead), "duplicate edge records"
    assert not (live & dead), "edge recorded both live and dead"
    for c in live:
        u, v = decode_edge(c)
        assert u in members and v in members, f"live edge ({u},{v}) leaves members"
    for c in dead:
        _, v = decode_edge(c)
        assert v in members, f"dead edge targets non-member {v}"
    by_target: dict[int, list[int]] = {}
    for c in live:
        u, v = decode_edge(c)
        by_target.setdefault(v, []).append(u)
    reached = {r.root}
    queue = deque([r.root])
    while queue:
        x = queue.popleft()
        for w in by_target.get(x, ()):
            if w not in reached:
                reached.add(w)
                queue.append(w)
    assert reached == members, "members differ from live-edge reachability"
    if g is not None:
        for c in live | dead:
            u, v = decode_edge(c)
            assert g.has_edge(u, v), f"recorded edge ({u},{v}) not in graph"
