"""Synthetic instances, update streams, and the experiment driver."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineKind, rerun_after_each_update
from .engine import Engine, EngineConfig
from .graphs import (
    DynGraph,
    InsertEdge,
    InsertNode,
    RemoveEdge,
    RemoveNode,
    apply_update,
)
from .oracles import min_spread


def gen_synthetic(n0: int, m0: int, feat_dim: int, rng) -> DynGraph:
    """n0 nodes with uniform [-1, 1] features, m0 distinct random arcs."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    cap = n0 * (n0 - 1)
    if m0 > cap:
        raise ValueError(f"m0={m0} exceeds the {cap} possible arcs")
    g = DynGraph(feat_dim)
    feats = rng.uniform(-1.0, 1.0, size=(n0, feat_dim))
    for v in range(n0):
        g.add_node(v, feats[v])
    if m0 > cap // 2:
        pairs = [(u, v) for u in range(n0) for v in range(n0) if u != v]
        for idx in rng.choice(len(pairs), size=m0, replace=False):
            g.add_edge(*pairs[idx])
    else:
        placed = 0
        while placed < m0:
            u = int(rng.integers(n0))
            v = int(rng.integers(n0))
            if u != v and not g.has_edge(u, v):
                g.add_edge(u, v)
                placed += 1
    g.n0 = g.n
    g.m0 = g.m
    return g


_INCREMENTAL_MIX = {"+n": 0.5, "+e": 0.5, "-n": 0.0, "-e": 0.0}
_DYNAMIC_MIX = {"+n": 0.25, "+e": 0.25, "-n": 0.25, "-e": 0.25}


@dataclass
class StreamSpec:
    count: int
    setting: str = "incremental"  # or "fully_dynamic"
    weights: dict | None = None

    def __post_init__(self):
        if self.setting not in ("incremental", "fully_dynamic"):
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.weights is None:
            self.weights = dict(_INCREMENTAL_MIX if self.setting == "incremental"
                                else _DYNAMIC_MIX)
        if self.setting == "incremental" and (
                self.weights.get("-n", 0) or self.weights.get("-e", 0)):
            raise ValueError("incremental mix cannot contain removals")


def gen_stream(g: DynGraph, spec: StreamSpec, rng) -> list:
    """Random updates, each valid against the evolving graph."""
    sim = g.copy()
    next_id = (max(sim.features) + 1) if sim.features else 0
    updates = []
    kinds = ["+n", "+e", "-n", "-e"]
    for _ in range(spec.count):
        valid = {"+n": True,
                 "+e": sim.n >= 2 and sim.m < sim.n * (sim.n - 1),
                 "-n": sim.n >= 1,
                 "-e": sim.m >= 1}
        weights = np.array([spec.weights.get(kd, 0.0) if valid[kd] else 0.0
                            for kd in kinds])
        if weights.sum() <= 0:
            weights = np.array([1.0, 0.0, 0.0, 0.0])
        weights = weights / weights.sum()
        kind = kinds[int(rng.choice(4, p=weights))]
        if kind == "+n":
            upd = InsertNode(next_id, tuple(rng.uniform(-1.0, 1.0, size=sim.feat_dim)))
            next_id += 1
        elif kind == "+e":
            while True:
                ids = sorted(sim.features)
                u = ids[int(rng.integers(len(ids)))]
                v = ids[int(rng.integers(len(ids)))]
                if u != v and not sim.has_edge(u, v):
                    break
            upd = InsertEdge(u, v)
        elif kind == "-n":
            ids = sorted(sim.features)
            upd = RemoveNode(ids[int(rng.integers(len(ids)))])
        else:
            edges = sorted(sim.edges)
            upd = RemoveEdge(*edges[int(rng.integers(len(edges)))])
        apply_update(sim, upd)
        updates.append(upd)
    return updates


@dataclass
class TraceRow:
    step: int
    cum_ns: int
    min_spread: float | None
    restarts: int


@dataclass
class ExperimentResult:
    algo: str
    rows: list
    final_seeds: tuple
    final_min_spread: float | None
    restarts: int
    total_ns: int
    stats: object | None = None


def write_trace_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("step,cum_ns,min_spread,restarts\n")
        for r in rows:
            ms = "" if r.min_spread is None else repr(r.min_spread)
            fh.write(f"{r.step},{r.cum_ns},{ms},{r.restarts}\n")


def _should_eval(step, total, stride, eval_runs):
    if eval_runs <= 0:
        return False
    if step == total:
        return True
    return stride > 0 and step % stride == 0


def run_experiment(graph: DynGraph, stream, cfg: EngineConfig, algo: str,
                   eval_runs: int = 10_000, eval_stride: int = 50,
                   record_gamma_trace: bool = False) -> ExperimentResult:
    """Run one algorithm over the update stream, producing a benchmark trace.

    Quality (`min_spread`) is evaluated out of band every `eval_stride` steps
    and at the end; the per-step cumulative time covers algorithm work only.
    `graph` is consumed (mutated in place).
    """
    eval_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 404]))
    total = len(stream)
    rows: list[TraceRow] = []
    if algo == "engine":
        eng = Engine(graph, cfg, record_gamma_trace=record_gamma_trace)
        thetas = eng.thetas

        def eval_current(step):
            if not _should_eval(step, total, eval_stride, eval_runs):
                return None
            return min_spread(eng.g, thetas, cfg.model, eng.current_solution().union,
                              eval_runs, eval_rng)

        rows.append(TraceRow(0, eng.total_ns(), eval_current(0), eng.stats.restarts))
        for step, upd in enumerate(stream, start=1):
            eng.process_update(upd)
            rows.append(TraceRow(step, eng.total_ns(), eval_current(step),
                                 eng.stats.restarts))
        final_seeds = tuple(eng.current_solution().union)
        return ExperimentResult("engine", rows, final_seeds, rows[-1].min_spread,
                                eng.stats.restarts, eng.total_ns(), eng.stats)

    kind = {"base": BaselineKind("base"),
            "hiro": BaselineKind("hiro", cfg.hiro_roots or max(1, graph.n // 10)),
            "lugreedy": BaselineKind("lugreedy")}.get(algo)
    if kind is None:
        raise ValueError(f"unknown algorithm {algo!r}")
    theta_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    from .probmodels import sample_hyperparameters

    thetas = sample_hyperparameters(cfg.space, cfg.l, theta_rng)
    base_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    final_seeds: tuple = ()
    for step, cum, seeds, gcur in rerun_after_each_update(kind, stream, graph,
                                                          thetas, cfg, base_rng):
        ms = None
        if _should_eval(step, total, eval_stride, eval_runs):
            ms = min_spread(gcur, thetas, cfg.model, seeds, eval_runs, eval_rng)
        rows.append(TraceRow(step, cum, ms, 0))
        final_seeds = tuple(sorted(seeds))
    return ExperimentResult(algo, rows, final_seeds, rows[-1].min_spread, 0,
                            rows[-1].cum_ns, None)
