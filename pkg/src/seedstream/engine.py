"""Dynamic robust seed-set engine.

Holds the graph, the sampled hyperparameters (drawn once at construction),
one coverage pair per sample, and the greedy thread lattice.  Updates are
processed strictly in sequence; a full rebuild fires when the graph doubles
or halves in size or when any pair's estimation copy exhausts its edge-scan
budget of 16 * R * m0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import coverage as cov_mod
from .coverage import CoveragePair, audit_pair, build_coverage_pair
from .graphs import DynGraph, InsertEdge, InsertNode, RemoveEdge, RemoveNode, Update
from .probmodels import HyperparamModel, HyperparamSpace, sample_hyperparameters
from .rrsets import RateEstimate, estimate_rate_probe, make_theta_probe
from .seeding import GreedyLattice, SeedSolution, empty_solution, gamma_of_trace


class ConfigError(ValueError):
    pass


class ModeError(ValueError):
    pass


@dataclass
class EngineConfig:
    k: int = 10
    eps1: float = 0.1
    eps2: float = 0.1
    delta1: float = 0.1
    delta2: float = 0.1
    B: float = 1.0
    d: int = 6
    center: np.ndarray | None = None
    model_kind: str = "logistic"
    l: int = 20
    T: int = 10
    mode: str = "incremental"
    R_override: float | None = 32.0
    seed: int = 0
    hiro_roots: int | None = None  # baseline parameter, carried for the CLI

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not (0.0 < self.eps1 < 1.0) or not (0.0 < self.eps2 < 1.0):
            raise ConfigError("eps1 and eps2 must lie in (0, 1)")
        if self.delta1 <= 0 or self.delta2 <= 0:
            raise ConfigError("delta1 and delta2 must be positive")
        if self.l < 1 or self.T < 1:
            raise ConfigError("l and T must be >= 1")
        if self.B < 0:
            raise ConfigError("B must be nonnegative")
        if self.d < 2 or self.d % 2 != 0:
            raise ConfigError("d must be an even integer >= 2")
        if self.mode not in ("incremental", "fully_dynamic"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.R_override is not None and self.R_override <= 0:
            raise ConfigError("R_override must be positive")
        if self.center is None:
            self.center = np.zeros(self.d)
        else:
            self.center = np.asarray(self.center, dtype=float)
            if self.center.shape != (self.d,):
                raise ConfigError(f"center must have length d={self.d}")

    @property
    def model(self) -> HyperparamModel:
        return HyperparamModel(self.model_kind, self.d)

    @property
    def space(self) -> HyperparamSpace:
        return HyperparamSpace(self.center, self.B)


_INT_FIELDS = {"k", "d", "l", "T", "seed", "hiro_roots"}
_FLOAT_FIELDS = {"eps1", "eps2", "delta1", "delta2", "B", "R_override"}


def config_from_file(path, **overrides) -> EngineConfig:
    """Parse `key = value` lines into an EngineConfig; kwargs win over file."""
    values: dict = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: bad config line {raw.rstrip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in _INT_FIELDS:
                values[key] = int(val)
            elif key in _FLOAT_FIELDS:
                values[key] = None if val.lower() == "none" else float(val)
            elif key == "center":
                values[key] = np.array([float(x) for x in val.split()])
            elif key in ("model_kind", "mode"):
                values[key] = val
            else:
                raise ConfigError(f"{path}: unknown config key {key!r}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return EngineConfig(**values)


def compute_delta_and_R(cfg: EngineConfig, n0: int, T: int, k: int) -> tuple[float, float]:
    """log(n0/delta) and the sampling budget R, evaluated in log space so the
    astronomically small delta never materializes."""
    if n0 < 1:
        raise ConfigError("n0 must be >= 1")
    if cfg.delta1 <= 0:
        raise ConfigError("delta1 must be positive")
    log_term = (12.0 * n0 * n0 / k**3) * (
        math.log(16.0) + T * k * math.log(2.0 * n0) - math.log(cfg.delta1)
    )
    if cfg.R_override is not None:
        return log_term, float(cfg.R_override)
    return log_term, k * cfg.eps1**-2 * log_term


@dataclass
class RunStats:
    restarts: int = 0
    phase_restarts: int = 0      # size doubling/halving boundaries crossed
    stage_restarts: int = 0      # est scan-budget rebuilds inside a phase
    updates: int = 0
    update_wall_ns: list = field(default_factory=list)
    est_edges_scanned: list = field(default_factory=list)
    gamma_events: int = 0
    gamma_incremental_max: float | None = None
    gamma_fully_dynamic_max: float | None = None
    gamma_trace: list | None = None  # (update, event, g_max_form, g_sum_form)

    def note_gamma(self, update_idx, event_idx, g_inc, g_fd):
        self.gamma_events += 1
        if self.gamma_incremental_max is None or g_inc > self.gamma_incremental_max:
            self.gamma_incremental_max = g_inc
        if self.gamma_fully_dynamic_max is None or g_fd > self.gamma_fully_dynamic_max:
            self.gamma_fully_dynamic_max = g_fd
        if self.gamma_trace is not None:
            self.gamma_trace.append((update_idx, event_idx, g_inc, g_fd))


class _LatticeObserver:
    """Mirrors cv-side structural changes of one pair into the lattice."""

    def __init__(self, lattice: GreedyLattice, pair_index: int):
        self.lattice = lattice
        self.i = pair_index

    def handle_deleted(self, hid, members):
        self.lattice.handle_deleted(self.i, hid, members)

    def membership_removed(self, node, hid):
        self.lattice.materialize_remove(self.i, node, hid)


class Engine:
    def __init__(self, graph: DynGraph, config: EngineConfig, record_gamma_trace: bool = False):
        if graph.edge_dim != config.d:
            raise ConfigError(
                f"graph carries {graph.edge_dim}-dim edge features, config says d={config.d}")
        self.g = graph
        self.cfg = config
        self.model = config.model
        theta_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 7]))
        self.thetas = sample_hyperparameters(config.space, config.l, theta_rng)
        self.stats = RunStats()
        if record_gamma_trace:
            self.stats.gamma_trace = []
        self.pairs: list[CoveragePair] = []
        self.lattice: GreedyLattice | None = None
        self.solution: SeedSolution = empty_solution(config.l)
        self._gamma_cache = (None, 0.0, 0.0)
        self.R = 0.0
        self.log_term = 0.0
        self.scan_budget = 0.0
        t0 = time.perf_counter_ns()
        self._restart("initial")
        self.init_ns = time.perf_counter_ns() - t0

    # -- restart ---------------------------------------------------------

    def _pair_rng(self, i: int):
        return np.random.default_rng(np.random.SeedSequence([self.cfg.seed, 1000 + i]))

    def restart(self) -> None:
        """Explicit rebuild without touching the trigger counters."""
        self._restart("manual")

    def _restart(self, trigger: str) -> None:
        cfg = self.cfg
        g = self.g
        g.n0 = g.n
        g.m0 = g.m
        self.stats.restarts += 1
        if trigger == "size":
            self.stats.phase_restarts += 1
        elif trigger == "budget":
            self.stats.stage_restarts += 1
        self.log_term, self.R = compute_delta_and_R(cfg, max(1, g.n0), cfg.T, cfg.k)
        self.scan_budget = 16.0 * self.R * g.m0 if g.m0 > 0 else 16.0 * self.R
        self.pairs = []
        self._gens = []
        for i in range(cfg.l):
            rng = self._pair_rng(i)
            probe = make_theta_probe(g, self.model, self.thetas[i])
            if g.n == 0:
                rate = RateEstimate(0, 1)
            else:
                rate = estimate_rate_probe(g, probe, self.R, g.m0, max(1, g.n0), rng)
            self.pairs.append(build_coverage_pair(
                g, self.thetas[i], rate, rng, index=i, probe=probe, defer_index=True))
            self._gens.append(rng)
        self.lattice = GreedyLattice(self.pairs, cfg.k, cfg.eps1, cfg.T,
                                     g.node_ids(), mode=cfg.mode)
        self._gamma_cache = (None, 0.0, 0.0)
        # replay every cv bipartite edge, in (node, root, pair, handle) order,
        # refreshing the seed state after each one
        events = []
        for i, pair in enumerate(self.pairs):
            for hid, rr in pair.cv.alive_handles():
                for u in rr.member_array():
                    events.append((int(u), rr.root, i, hid))
        events.sort()
        sol = None
        for (u, _, i, hid) in events:
            self.pairs[i].cv.add_membership(hid, u)
            self.lattice.materialize_insert(i, u, hid)
            sol = self.lattice.find_seeds(u, "insert", finalize=False)
            self._note_gamma(sol)
        self.solution = sol if sol is not None else empty_solution(cfg.l)
        self._finalize_solution()

    def _finalize_solution(self) -> None:
        if self.solution.per_theta_values is None:
            self.solution.per_theta_values = self.lattice.union_values(self.solution.union)

    def _note_gamma(self, sol: SeedSolution) -> None:
        cached_sol, g_inc, g_fd = self._gamma_cache
        if sol is not cached_sol:
            opt = self.lattice.best_objective_uniform()
            if opt <= 0.0 or sol.gamma is None:
                return
            g_inc = gamma_of_trace(sol.gamma, opt, "incremental")
            g_fd = gamma_of_trace(sol.gamma, opt, "fully_dynamic")
            self._gamma_cache = (sol, g_inc, g_fd)
        self.stats.note_gamma(self.stats.updates, self.stats.gamma_events, g_inc, g_fd)

    # -- update handlers --------------------------------------------------

    def insert_node(self, v: int, features) -> None:
        self.g.add_node(v, features)
        if self.g.n >= 2 * self.g.n0:
            self._restart("size")
            return
        self.lattice.node_added(v)
        for i, pair in enumerate(self.pairs):
            _, cv_ids = cov_mod.on_insert_node(pair, v, self._gens[i])
            for hid in cv_ids:
                self.lattice.materialize_insert(i, v, hid)

    def insert_edge(self, u: int, v: int) -> None:
        self.g.add_edge(u, v)
        if self.g.m >= 2 * self.g.m0:
            self._restart("size")
            return
        for i, pair in enumerate(self.pairs):
            _, tripped = cov_mod.est_insert_edge(pair, self.g, (u, v), self._gens[i],
                                                 budget=self.scan_budget)
            if tripped:
                self._restart("budget")
                return
        sol = None
        for i, pair in enumerate(self.pairs):
            events = cov_mod.cv_insert_edge(pair, self.g, (u, v), self._gens[i], defer=True)
            for (node, hid) in events:
                pair.cv.add_membership(hid, node)
                self.lattice.materialize_insert(i, node, hid)
                sol = self.lattice.find_seeds(node, "insert", finalize=False)
                self._note_gamma(sol)
        if sol is not None:
            self.solution = sol
            self._finalize_solution()

    def remove_node(self, v: int) -> None:
        if self.cfg.mode != "fully_dynamic":
            raise ModeError("node removal requires fully_dynamic mode")
        removed_edges = self.g.remove_node(v)
        if self.g.n <= self.g.n0 / 2:
            self._restart("size")
            return
        for i, pair in enumerate(self.pairs):
            cov_mod.on_remove_node(pair, v, removed_edges,
                                   observer=_LatticeObserver(self.lattice, i))
        self.lattice.node_removed(v)
        # matching the update taxonomy: no seed refresh on node removal, so a
        # removed node that was a seed stays in the solution (see stale_seeds)

    def remove_edge(self, u: int, v: int) -> None:
        if self.cfg.mode != "fully_dynamic":
            raise ModeError("edge removal requires fully_dynamic mode")
        self.g.remove_edge(u, v)
        if self.g.m <= self.g.m0 / 2:
            self._restart("size")
            return
        for i, pair in enumerate(self.pairs):
            _, tripped = cov_mod.est_remove_edge(pair, self.g, (u, v),
                                                 budget=self.scan_budget)
            if tripped:
                self._restart("budget")
                return
        sol = None
        for i, pair in enumerate(self.pairs):
            events = cov_mod.cv_remove_edge(pair, self.g, (u, v), defer=True)
            for (node, hid) in events:
                pair.cv.remove_membership(hid, node)
                self.lattice.materialize_remove(i, node, hid)
                sol = self.lattice.find_seeds(node, "remove", finalize=False)
                self._note_gamma(sol)
        if sol is not None:
            self.solution = sol
            self._finalize_solution()

    def process_update(self, upd: Update) -> None:
        if self.cfg.mode == "incremental" and isinstance(upd, (RemoveNode, RemoveEdge)):
            raise ModeError(f"removal update {upd} in incremental mode")
        t0 = time.perf_counter_ns()
        if isinstance(upd, InsertNode):
            self.insert_node(upd.node, upd.features)
        elif isinstance(upd, InsertEdge):
            self.insert_edge(upd.source, upd.target)
        elif isinstance(upd, RemoveNode):
            self.remove_node(upd.node)
        elif isinstance(upd, RemoveEdge):
            self.remove_edge(upd.source, upd.target)
        else:
            raise TypeError(f"not an update: {upd!r}")
        self.stats.updates += 1
        self.stats.update_wall_ns.append(time.perf_counter_ns() - t0)
        self.stats.est_edges_scanned = [p.est_edges_scanned for p in self.pairs]

    # -- reads -------------------------------------------------------------

    def current_solution(self) -> SeedSolution:
        return self.solution

    def stale_seeds(self) -> list[int]:
        return self.lattice.stale_seeds()

    def total_ns(self) -> int:
        return self.init_ns + sum(self.stats.update_wall_ns)

    def audit(self) -> None:
        for pair in self.pairs:
            audit_pair(pair, self.g)
        self.lattice.audit()
        assert len(self.solution.union) <= self.cfg.T * self.cfg.k
