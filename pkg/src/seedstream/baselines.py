"""From-scratch comparison methods, rerun on the full graph after every
network update.

BASE builds one RR set per node per sampled hyperparameter and runs T
weighted greedy passes; HIRO does the same from a smaller, per-iteration
resampled root pool; LUGreedy runs plain greedy under the lower and upper
probability bounds and keeps whichever set looks better under the lower
bounds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graphs import apply_update
from .oracles import monte_carlo_spread_probs
from .probmodels import HyperparamModel, HyperparamSpace, edge_feature, prob_bounds
from .rrsets import make_prob_map_probe, make_theta_probe, sample_rr_probe
from .seeding import hedge_eta, hedge_weights


@dataclass(frozen=True)
class BaselineKind:
    name: str  # "base" | "hiro" | "lugreedy"
    root_count: int | None = None

    def __post_init__(self):
        if self.name not in ("base", "hiro", "lugreedy"):
            raise ValueError(f"unknown baseline {self.name!r}")
        if self.name == "hiro" and (self.root_count is None or self.root_count < 1):
            raise ValueError("hiro needs root_count >= 1")


class _Collection:
    """RR sets for one probability configuration, as flat coverage arrays."""

    def __init__(self, g, members_list, scale):
        ids = g.node_ids()
        self.ids = np.array(ids, dtype=np.int64)
        pos = {v: i for i, v in enumerate(ids)}
        self.scale = scale
        self.sets = [np.fromiter((pos[int(u)] for u in m), dtype=np.int64, count=len(m))
                     for m in members_list]
        self.node_sets: list[list[int]] = [[] for _ in ids]
        for sid, slots in enumerate(self.sets):
            for s in slots:
                self.node_sets[s].append(sid)
        self.base_gain = np.zeros(len(ids), dtype=np.int32)
        for slots in self.sets:
            self.base_gain[slots] += 1


def _sample_collection(g, probe, roots, rng, scale) -> _Collection:
    members = [sample_rr_probe(g, probe, int(r), rng).member_array() for r in roots]
    return _Collection(g, members, scale)


def weighted_greedy(collections, weights, k: int):
    """Plain max-coverage greedy (no thresholds): up to k picks, stopping
    when no node has positive weighted gain.  Returns (seeds, f values)."""
    ids = collections[0].ids
    gains = [c.base_gain.astype(float).copy() for c in collections]
    covered = [np.zeros(len(c.sets), dtype=bool) for c in collections]
    counts = np.zeros(len(collections))
    chosen: list[int] = []
    chosen_slots: set[int] = set()
    wsc = np.array([w * c.scale for w, c in zip(weights, collections)])
    for _ in range(k):
        total = sum(w * gn for w, gn in zip(wsc, gains))
        for s in chosen_slots:
            total[s] = -1.0
        best = float(total.max()) if len(total) else -1.0
        if best <= 0.0:
            break
        ties = np.flatnonzero(total == best)
        slot = int(ties[0]) if len(ties) == 1 else int(ties[np.argmin(ids[ties])])
        chosen.append(int(ids[slot]))
        chosen_slots.add(slot)
        for ci, c in enumerate(collections):
            for sid in c.node_sets[slot]:
                if not covered[ci][sid]:
                    covered[ci][sid] = True
                    counts[ci] += 1
                    gains[ci][c.sets[sid]] -= 1
    f_values = counts * np.array([c.scale for c in collections])
    return chosen, f_values


def _mwu_union(g, collections_for_iter, l: int, T: int, k: int) -> list[int]:
    eta = hedge_eta(l, T)
    losses = np.zeros(l)
    union: set[int] = set()
    n = max(1, g.n)
    for j in range(T):
        w = hedge_weights(eta, losses)
        chosen, f_row = weighted_greedy(collections_for_iter(j), w, k)
        union.update(chosen)
        losses = losses + f_row / n
    return sorted(union)


def run_base(g, thetas, cfg, rng) -> list[int]:
    """One RR set per node per hyperparameter, built once, then T weighted
    greedy passes; returns the union of the candidates."""
    if g.n == 0:
        raise ValueError("graph is empty")
    roots = g.node_ids()
    collections = [
        _sample_collection(g, make_theta_probe(g, cfg.model, th), roots, rng, 1.0)
        for th in thetas
    ]
    return _mwu_union(g, lambda j: collections, len(thetas), cfg.T, cfg.k)


def run_hiro(g, thetas, cfg, root_count: int, rng) -> list[int]:
    """Like BASE but sampling `root_count` uniform roots, fresh for every
    weighted-greedy iteration; spread estimates scaled by n / root_count."""
    if g.n == 0:
        raise ValueError("graph is empty")
    ids = g.node_ids()
    probes = [make_theta_probe(g, cfg.model, th) for th in thetas]
    scale = g.n / root_count

    def fresh(_j):
        return [
            _sample_collection(
                g, probe,
                [ids[rng.integers(len(ids))] for _ in range(root_count)],
                rng, scale,
            )
            for probe in probes
        ]

    return _mwu_union(g, fresh, len(thetas), cfg.T, cfg.k)


def run_lugreedy(g, model: HyperparamModel, space: HyperparamSpace, cfg, rng,
                 rr_per_node: int = 1, eval_runs: int = 2000) -> list[int]:
    """Greedy under the optimistic and the pessimistic edge probabilities;
    keeps whichever seed set scores higher under the pessimistic ones."""
    if g.n == 0:
        raise ValueError("graph is empty")
    lo, hi = {}, {}
    for (u, v) in g.edges:
        xe = edge_feature(g.features[u], g.features[v])
        lo[(u, v)], hi[(u, v)] = prob_bounds(model, space, xe)
    roots = [v for v in g.node_ids() for _ in range(rr_per_node)]
    picks = []
    for probs in (lo, hi):
        coll = _sample_collection(g, make_prob_map_probe(probs), roots, rng,
                                  g.n / max(1, len(roots)))
        seeds, _ = weighted_greedy([coll], np.ones(1), cfg.k)
        picks.append(seeds)
    lo_set, hi_set = picks
    lo_score = monte_carlo_spread_probs(g, lo, lo_set, eval_runs, rng)[0]
    hi_score = monte_carlo_spread_probs(g, lo, hi_set, eval_runs, rng)[0]
    return lo_set if lo_score >= hi_score else hi_set


def run_baseline(kind: BaselineKind, g, thetas, cfg, rng, **lu_kwargs) -> list[int]:
    if kind.name == "base":
        return run_base(g, thetas, cfg, rng)
    if kind.name == "hiro":
        return run_hiro(g, thetas, cfg, kind.root_count, rng)
    return run_lugreedy(g, cfg.model, cfg.space, cfg, rng, **lu_kwargs)


def rerun_after_each_update(kind: BaselineKind, stream, g0, thetas, cfg, rng):
    """Apply each update and rerun the baseline from scratch on the full
    current graph; yields (step, cumulative_ns, seed list)."""
    g = g0.copy()
    cum = 0
    t0 = time.perf_counter_ns()
    seeds = run_baseline(kind, g, thetas, cfg, rng)
    cum += time.perf_counter_ns() - t0
    yield 0, cum, seeds, g
    for step, upd in enumerate(stream, start=1):
        apply_update(g, upd)
        t0 = time.perf_counter_ns()
        seeds = run_baseline(kind, g, thetas, cfg, rng)
        cum += time.perf_counter_ns() - t0
        yield step, cum, seeds, g
