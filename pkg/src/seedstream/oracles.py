"""Ground-truth spread oracles: exact enumeration over live-edge subsets,
Monte-Carlo cascade simulation, and a brute-force robust optimum for tiny
instances."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .probmodels import HyperparamModel, edge_feature, edge_probability, response


class SizeError(ValueError):
    """Instance too large for exact enumeration."""


def probs_from_theta(g, model: HyperparamModel, theta) -> dict:
    """Per-edge probability map induced by one hyperparameter vector."""
    return {
        (u, v): edge_probability(model, theta, edge_feature(g.features[u], g.features[v]))
        for (u, v) in g.edges
    }


def exact_spread(g, probs: dict, seeds) -> float:
    """Expected influenced count, by enumeration over all live-edge subsets."""
    if g.m > 20:
        raise SizeError(f"exact enumeration limited to 20 edges, graph has {g.m}")
    seeds = set(seeds)
    for s in seeds:
        if not g.has_node(s):
            raise ValueError(f"seed {s} is not a live node")
    if not seeds:
        return 0.0
    edges = sorted(g.edges)
    p = np.array([probs[e] for e in edges])
    total = 0.0
    for mask in range(1 << len(edges)):
        weight = 1.0
        adj: dict[int, list[int]] = {}
        for j, e in enumerate(edges):
            if mask >> j & 1:
                weight *= p[j]
                adj.setdefault(e[0], []).append(e[1])
            else:
                weight *= 1.0 - p[j]
        if weight == 0.0:
            continue
        reached = set(seeds)
        stack = list(seeds)
        while stack:
            u = stack.pop()
            for v in adj.get(u, ()):
                if v not in reached:
                    reached.add(v)
                    stack.append(v)
        total += weight * len(reached)
    return total


def _half_dots(g, model: HyperparamModel, theta):
    theta = np.asarray(theta, dtype=float)
    h = model.dim // 2
    a = {u: float(theta[:h] @ f) for u, f in g.features.items()}
    b = {v: float(theta[h:] @ f) for v, f in g.features.items()}
    return a, b


def _run_cascades(g, prob_of, seeds, runs: int, rng) -> np.ndarray:
    seeds = sorted(set(seeds))
    sizes = np.empty(runs)
    out_adj = g.out_adj
    for r in range(runs):
        active = set(seeds)
        frontier = list(seeds)
        while frontier:
            fresh = []
            for u in frontier:
                for v in out_adj[u]:
                    if v not in active and rng.random() < prob_of(u, v):
                        active.add(v)
                        fresh.append(v)
            frontier = fresh
        sizes[r] = len(active)
    return sizes


def _summarize(sizes: np.ndarray) -> tuple[float, float]:
    mean = float(sizes.mean()) if len(sizes) else 0.0
    if len(sizes) < 2:
        return mean, 0.0
    return mean, float(sizes.std(ddof=1) / math.sqrt(len(sizes)))


def monte_carlo_spread(g, theta, model: HyperparamModel, seeds, runs: int, rng):
    """Sample mean and standard error of the cascade size from `seeds`."""
    if not seeds:
        return 0.0, 0.0
    a, b = _half_dots(g, model, theta)
    kind = model

    def prob_of(u, v):
        return response(kind, a[u] + b[v])

    return _summarize(_run_cascades(g, prob_of, seeds, runs, rng))


def monte_carlo_spread_probs(g, probs: dict, seeds, runs: int, rng):
    """Same cascade estimate under an explicit per-edge probability map."""
    if not seeds:
        return 0.0, 0.0
    return _summarize(_run_cascades(g, lambda u, v: probs[(u, v)], seeds, runs, rng))


def min_spread(g, thetas, model: HyperparamModel, seeds, runs: int, rng) -> float:
    """Worst-case Monte-Carlo spread across the sampled hyperparameters."""
    return min(monte_carlo_spread(g, th, model, seeds, runs, rng)[0] for th in thetas)


def _reach_bits_per_mask(g, edges, mask) -> dict[int, int]:
    """For one live-edge subset: bitmask of nodes reachable from each node."""
    nodes = g.node_ids()
    bit = {v: 1 << i for i, v in enumerate(nodes)}
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for j, (u, v) in enumerate(edges):
        if mask >> j & 1:
            adj[u].append(v)
    reach = {}
    for s in nodes:
        seen = {s}
        stack = [s]
        acc = bit[s]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    acc |= bit[v]
                    stack.append(v)
        reach[s] = acc
    return reach


def brute_force_robust_opt(g, thetas, model: HyperparamModel, k: int):
    """Enumerate all k-subsets and return the one maximizing the minimum
    exact spread over `thetas`."""
    if g.n > 12 or k > 3 or g.m > 16:
        raise SizeError("brute force limited to n <= 12, k <= 3, m <= 16")
    nodes = g.node_ids()
    k = min(k, len(nodes))
    edges = sorted(g.edges)
    subsets = list(combinations(nodes, k))
    values = np.full((len(thetas), len(subsets)), 0.0)
    for ti, theta in enumerate(thetas):
        probs = probs_from_theta(g, model, theta)
        p = np.array([probs[e] for e in edges])
        for mask in range(1 << len(edges)):
            weight = 1.0
            for j in range(len(edges)):
                weight *= p[j] if mask >> j & 1 else 1.0 - p[j]
            if weight == 0.0:
                continue
            reach = _reach_bits_per_mask(g, edges, mask)
            for si, sub in enumerate(subsets):
                acc = 0
                for s in sub:
                    acc |= reach[s]
                values[ti, si] += weight * acc.bit_count()
    robust = values.min(axis=0)
    best = int(np.argmax(robust))
    return set(subsets[best]), float(robust[best])
