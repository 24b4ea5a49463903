"""Robust seed selection: threshold greedy over target threads, driven by
multiplicative weight updates across the sampled hyperparameters.

Thread `i` chases the objective estimate (1 + eps1)^i: a node is accepted
while its marginal gain is at least [(1+eps1)^i - F(S_i)] / k.  One seed set
is kept per thread; the returned set is the thread argmax under the current
objective.  Find-Seeds wraps T weighted greedy passes (each evaluated
against the persistent thread state and rolled back) and one final pass
under uniform weights that actually advances the threads.

Only the persisted passes write the per-thread value history, so the drift
terms in the greedy guarantee (the gamma trace) are measured against the
uniform-weight objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coverage import f_cv


# -- contract-level types ----------------------------------------------------


@dataclass
class SeedRecord:
    """One accepted seed: the evidence that it met its acceptance rule."""

    node: int
    gain: float
    threshold: float | None  # None for the mandatory re-add in removal mode
    value: float             # objective value of the prefix right after the add
    next_value: float | None = None  # same prefix, re-observed at the next add


@dataclass
class GreedyThread:
    index: int
    target: float
    seeds: list[int] = field(default_factory=list)
    history: list[SeedRecord] = field(default_factory=list)


@dataclass(frozen=True)
class GammaTrace:
    """Per-position objective drift of one thread's seed prefix.

    deltas[x-1] = F_{t_x}(S_{1:x}) - F_{t_{x+1}}(S_{1:x}); the trailing
    position is closed against the objective current at snapshot time.
    """

    deltas: tuple
    k: int


def thread_count(n: int, eps1: float) -> int:
    """Number of greedy threads for a graph of n nodes: indices
    0 .. ceil(ln(n)/eps1)."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n) / eps1) + 1


def make_threads(n: int, eps1: float) -> list[GreedyThread]:
    return [GreedyThread(i, (1.0 + eps1) ** i) for i in range(thread_count(n, eps1))]


def gamma_of_trace(trace: GammaTrace, opt: float, mode: str) -> float:
    """Greedy-guarantee degradation: max form for the incremental setting,
    sum form for the fully dynamic one."""
    if opt <= 0:
        raise ValueError("OPT must be positive")
    size = len(trace.deltas)
    if size == 0:
        return 0.0
    decay = 1.0 - 1.0 / trace.k
    terms = [d / opt * decay ** (size - x) for x, d in enumerate(trace.deltas, start=1)]
    if mode == "incremental":
        return max(terms)
    if mode == "fully_dynamic":
        return sum(terms)
    raise ValueError(f"unknown mode {mode!r}")


def snapshot_trace(thread: GreedyThread, current_value: float) -> GammaTrace:
    deltas = []
    for rec in thread.history:
        nxt = rec.next_value if rec.next_value is not None else current_value
        deltas.append(rec.value - nxt)
    return GammaTrace(tuple(deltas), max(1, len(thread.seeds)))


def verify_thread_certificates(thread: GreedyThread) -> None:
    """Replay the value history: every accepted node met its rule."""
    for rec in thread.history:
        if rec.threshold is None:
            assert rec.gain > 0.0, f"mandatory add of {rec.node} had gain {rec.gain}"
        else:
            assert rec.gain >= rec.threshold, (
                f"node {rec.node}: gain {rec.gain} below threshold {rec.threshold}"
            )


# -- multiplicative weight updates -------------------------------------------


def hedge_eta(l: int, T: int) -> float:
    """Standard Hedge rate for losses scaled into [0, 1]."""
    if l <= 1:
        return 0.0
    return math.sqrt(8.0 * math.log(l) / T)


def hedge_weights(eta: float, loss_sums: np.ndarray) -> np.ndarray:
    """w_i proportional to exp(-eta * loss_sums_i); strictly positive."""
    if len(loss_sums) == 1:
        return np.ones(1)
    z = -eta * (loss_sums - loss_sums.min())
    w = np.exp(z)
    return w / w.sum()


@dataclass
class MWUState:
    eta: float
    n: int = 1
    history: list = field(default_factory=list)  # raw per-iteration f rows

    def record(self, f_row) -> None:
        self.history.append(np.asarray(f_row, dtype=float))


def mwu_weights(state: MWUState, j: int) -> np.ndarray:
    """Weights for iteration j (1-based); uniform when there is no history."""
    if j < 1 or len(state.history) < j - 1:
        raise ValueError(f"iteration {j} needs {j - 1} recorded rows")
    if not state.history or j == 1:
        l = len(state.history[0]) if state.history else 1
        return np.ones(l) / l
    sums = np.sum(state.history[: j - 1], axis=0) / state.n
    return hedge_weights(state.eta, sums)


def weighted_objective(weights, pairs):
    """F(S) = sum_i w_i * f_cv(pair_i, S); monotone submodular."""
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(pairs):
        raise ValueError("one weight per pair required")

    def F(seeds) -> float:
        return float(sum(w * f_cv(p, seeds) for w, p in zip(weights, pairs)))

    return F


# -- reference greedy (callable-objective path) -------------------------------


def greedy_insert(threads, F, entry: int, k: int, eps1: float, universe=None):
    """Threshold greedy on every unfrozen thread, starting from `entry`.

    Mutates the threads in place (including value histories) and returns the
    seed set of the thread maximizing F.  `universe` is the candidate node
    pool; it defaults to nothing beyond the entry node, so callers normally
    pass the graph's node ids.
    """
    universe = sorted(universe) if universe is not None else [entry]
    for th in threads:
        if len(th.seeds) >= k:
            continue
        val = F(th.seeds)
        u = entry
        gain = 0.0 if u in th.seeds else F(th.seeds + [u]) - val
        while len(th.seeds) < k:
            thr = (th.target - val) / k
            if gain < thr:
                break
            if u not in th.seeds:
                if th.history:
                    last = th.history[-1]
                    if last.next_value is None:
                        last.next_value = val
                th.seeds.append(u)
                val = F(th.seeds)
                th.history.append(SeedRecord(u, gain, thr, val))
            best_gain, best_node = -1.0, None
            for v in universe:
                if v in th.seeds:
                    continue
                g = F(th.seeds + [v]) - val
                if g > best_gain:
                    best_gain, best_node = g, v
            if best_node is None:
                break
            u, gain = best_node, best_gain
    best = max(threads, key=lambda th: (F(th.seeds), -th.index))
    return list(best.seeds)


def greedy_remove(threads, F, removed: int, k: int, eps1: float, universe=None):
    """Removal variant: drop the vanished node, re-add the best node once
    (no threshold, positive gain required), then continue under the
    threshold rule."""
    universe = sorted(universe) if universe is not None else []
    for th in threads:
        if removed in th.seeds:
            pos = th.seeds.index(removed)
            th.seeds.pop(pos)
            if pos < len(th.history):
                th.history.pop(pos)
        if len(th.seeds) >= k:
            continue
        val = F(th.seeds)
        mandatory = True
        while len(th.seeds) < k:
            best_gain, best_node = -1.0, None
            for v in universe:
                if v in th.seeds:
                    continue
                g = F(th.seeds + [v]) - val
                if g > best_gain:
                    best_gain, best_node = g, v
            if best_node is None:
                break
            if mandatory:
                if best_gain <= 0.0:
                    break
                thr = None
            else:
                thr = (th.target - val) / k
                if best_gain < thr:
                    break
            if th.history:
                last = th.history[-1]
                if last.next_value is None:
                    last.next_value = val
            th.seeds.append(best_node)
            val = F(th.seeds)
            th.history.append(SeedRecord(best_node, best_gain, thr, val))
            mandatory = False
    best = max(threads, key=lambda th: (F(th.seeds), -th.index))
    return list(best.seeds)


# -- solutions ----------------------------------------------------------------


@dataclass
class SeedSolution:
    """Output of one Find-Seeds invocation."""

    candidates: tuple            # S^(1) .. S^(T), each a tuple of node ids
    union: tuple                 # sorted union of the candidates
    per_theta_values: np.ndarray | None  # f_cv of the union, one per pair
    best: tuple                  # argmax-thread seed set of the uniform pass
    gamma: GammaTrace | None
    f_rows: np.ndarray           # (T, l) recorded f_cv of each candidate


def empty_solution(l: int) -> SeedSolution:
    return SeedSolution((), (), np.zeros(l), (), GammaTrace((), 1), np.zeros((0, l)))


def build_lattice(pairs, k: int, eps1: float, T: int, node_ids, mode: str = "incremental"):
    """Lattice over fully-materialized pairs (all bipartite edges mirrored)."""
    lat = GreedyLattice(pairs, k, eps1, T, node_ids, mode)
    for i, pair in enumerate(pairs):
        for hid, _ in pair.cv.alive_handles():
            for u in pair.cv.handle_members[hid]:
                lat.materialize_insert(i, u, hid)
    return lat


# -- the fast bookkeeping lattice ---------------------------------------------


class GreedyLattice:
    """Incremental marginal-gain and coverage bookkeeping for all threads.

    State mirrors the materialized bipartite edges of the pairs' cv copies:

        G[t, i, s]       uncovered-handle count of node slot s for thread t
        cov[t, i]        covered-handle count of thread t in pair i
        cover_mult[i][t, h]  how many of thread t's seeds lie in handle h

    Scratch greedy passes mutate this state under an undo log and roll back;
    the uniform pass commits and extends thread histories.
    """

    def __init__(self, pairs, k: int, eps1: float, T: int, node_ids, mode: str = "incremental"):
        self.pairs = pairs
        self.l = len(pairs)
        self.k = k
        self.eps1 = eps1
        self.T = T
        self.mode = mode
        self.eta = hedge_eta(self.l, T)
        self.scales = np.array([p.scale for p in pairs], dtype=float)

        ids = sorted(node_ids)
        self.n_live = len(ids)
        cap = max(4, 2 * len(ids) + 4)
        self.ids = np.full(cap, -1, dtype=np.int64)
        self.ids[: len(ids)] = ids
        self.pos = {v: i for i, v in enumerate(ids)}
        self.alive = np.zeros(cap, dtype=bool)
        self.alive[: len(ids)] = True
        self.used = len(ids)

        self.threads = make_threads(self.n_live, eps1)
        tc = len(self.threads)
        self.targets = np.array([th.target for th in self.threads])
        self.G = np.zeros((tc, self.l, cap), dtype=np.int32)
        self.maxG = np.zeros((tc, self.l), dtype=np.int32)  # upper bound on max_v G[t,i,v]
        self.cov = np.zeros((tc, self.l), dtype=np.int64)
        self.seed_mask = np.zeros((tc, cap), dtype=bool)
        self.seed_len = np.zeros(tc, dtype=np.int64)
        self.cover_mult = []
        for p in pairs:
            hcap = max(4, len(p.cv.handles) + 2 * len(ids) + 4)
            self.cover_mult.append(np.zeros((tc, hcap), dtype=np.int16))

        self.enable_batch = True  # vectorized no-work fast paths (A/B testable)
        self._mslots: list[dict] = [{} for _ in pairs]  # handle -> member slot array
        self._recycle_cache: dict = {}  # thread -> sole-cover count vectors
        self._cached: SeedSolution | None = None
        self._w_stack: np.ndarray | None = None
        self._w_cache = None
        self._reuse_ok = False

    # -- slot bookkeeping --

    def _slot(self, node: int) -> int:
        return self.pos[node]

    def _slots(self, nodes) -> np.ndarray:
        return np.fromiter((self.pos[v] for v in nodes), dtype=np.int64, count=len(nodes))

    def _member_slots(self, i: int, hid: int) -> np.ndarray:
        """Slot array of a handle's materialized members, cached until the
        handle's membership changes."""
        arr = self._mslots[i].get(hid)
        if arr is None:
            arr = self._slots(self.pairs[i].cv.handle_members[hid])
            self._mslots[i][hid] = arr
        return arr

    def _shift_gains(self, t: int, i: int, handle_ids, delta: int) -> None:
        """Add `delta` to G[t, i, m] for every member m of every handle in
        `handle_ids` (with multiplicity)."""
        parts = [self._member_slots(i, int(h)) for h in handle_ids]
        touched = parts[0] if len(parts) == 1 else np.concatenate(parts)
        if len(touched) < 48:
            if delta > 0:
                np.add.at(self.G[t, i], touched, delta)
            else:
                np.subtract.at(self.G[t, i], touched, -delta)
        else:
            counts = np.bincount(touched, minlength=self.G.shape[2])
            if delta > 0:
                self.G[t, i] += counts
            else:
                self.G[t, i] -= counts
        if delta > 0 and len(touched):
            top = int(self.G[t, i][touched].max())
            if top > self.maxG[t, i]:
                self.maxG[t, i] = top

    def node_added(self, node: int) -> None:
        if self.used == len(self.ids):
            extra = len(self.ids)
            self.ids = np.concatenate([self.ids, np.full(extra, -1, dtype=np.int64)])
            self.alive = np.concatenate([self.alive, np.zeros(extra, dtype=bool)])
            self.seed_mask = np.concatenate(
                [self.seed_mask, np.zeros((self.seed_mask.shape[0], extra), dtype=bool)], axis=1)
            self.G = np.concatenate(
                [self.G, np.zeros((*self.G.shape[:2], extra), dtype=np.int32)], axis=2)
        s = self.used
        self.used += 1
        self.ids[s] = node
        self.pos[node] = s
        self.alive[s] = True
        self.n_live += 1
        self._reuse_ok = False

    def node_removed(self, node: int) -> None:
        self.alive[self._slot(node)] = False
        self.n_live -= 1
        self._reuse_ok = False

    def _ensure_handle(self, i: int, hid: int) -> None:
        cm = self.cover_mult[i]
        if hid >= cm.shape[1]:
            extra = max(cm.shape[1], hid + 1 - cm.shape[1])
            self.cover_mult[i] = np.concatenate(
                [cm, np.zeros((cm.shape[0], extra), dtype=np.int16)], axis=1)

    # -- mirroring materialized bipartite edges --

    def materialize_insert(self, i: int, node: int, hid: int) -> None:
        """Edge (node, hid) became part of pair i's cv index (index first)."""
        self._ensure_handle(i, hid)
        self._mslots[i].pop(hid, None)
        s = self._slot(node)
        cm = self.cover_mult[i]
        col = cm[:, hid]
        uncovered = col == 0
        self.G[:, i, s] += uncovered
        np.maximum(self.maxG[:, i], self.G[:, i, s], out=self.maxG[:, i])
        seeded = self.seed_mask[:, s]
        if seeded.any():
            flip = seeded & uncovered
            if flip.any():
                mslots = self._member_slots(i, hid)
                for t in np.flatnonzero(flip):
                    self.cov[t, i] += 1
                    self.G[t, i, mslots] -= 1
            col[seeded] += 1
            self._reuse_ok = False

    def materialize_remove(self, i: int, node: int, hid: int) -> None:
        """Edge (node, hid) left pair i's cv index (index updated first)."""
        self._ensure_handle(i, hid)
        self._mslots[i].pop(hid, None)
        s = self._slot(node)
        cm = self.cover_mult[i]
        col = cm[:, hid]
        uncovered_before = col == 0
        self.G[:, i, s] -= uncovered_before
        seeded = self.seed_mask[:, s]
        if seeded.any():
            col[seeded] -= 1
            flip = ~uncovered_before & (col == 0)
            if flip.any():
                mslots = self._member_slots(i, hid)
                for t in np.flatnonzero(flip):
                    self.cov[t, i] -= 1
                    if len(mslots):
                        self.G[t, i, mslots] += 1
                        top = int(self.G[t, i][mslots].max())
                        if top > self.maxG[t, i]:
                            self.maxG[t, i] = top
        self._reuse_ok = False

    def handle_deleted(self, i: int, hid: int, members) -> None:
        """Handle dropped outright (its root was removed); `members` is its
        materialized member list just before deletion."""
        self._ensure_handle(i, hid)
        self._mslots[i].pop(hid, None)
        cm = self.cover_mult[i]
        covered = cm[:, hid] > 0
        if members:
            mslots = self._slots(members)
            unc = np.flatnonzero(~covered)
            if len(unc):
                self.G[np.ix_(unc, [i], mslots)] -= 1
        self.cov[covered, i] -= 1
        cm[:, hid] = 0
        self._reuse_ok = False

    # -- seed mutations (shared by scratch and persist passes) --

    def _accept(self, t: int, node: int, log) -> None:
        s = self._slot(node)
        newly = []
        for i, pair in enumerate(self.pairs):
            hids = pair.cv.handles_containing(node)
            if not hids:
                continue
            cm = self.cover_mult[i]
            harr = np.asarray(hids)
            was = cm[t, harr]
            cm[t, harr] = was + 1
            fresh = harr[was == 0]
            if len(fresh):
                newly.append((i, fresh))
                self.cov[t, i] += len(fresh)
                self._shift_gains(t, i, fresh, -1)
        self.seed_mask[t, s] = True
        self.threads[t].seeds.append(node)
        self.seed_len[t] += 1
        self._recycle_cache.pop(t, None)
        if log is not None:
            log.append(("accept", t, node, newly))
        self._reuse_ok = False

    def _remove_seed(self, t: int, node: int, log) -> SeedRecord | None:
        s = self._slot(node)
        trans = []
        for i, pair in enumerate(self.pairs):
            hids = pair.cv.handles_containing(node)
            if not hids:
                continue
            cm = self.cover_mult[i]
            harr = np.asarray(hids)
            was = cm[t, harr]
            cm[t, harr] = was - 1
            gone = harr[was == 1]
            if len(gone):
                trans.append((i, gone))
                self.cov[t, i] -= len(gone)
                self._shift_gains(t, i, gone, 1)
        self.seed_mask[t, s] = False
        th = self.threads[t]
        pos = th.seeds.index(node)
        th.seeds.pop(pos)
        self.seed_len[t] -= 1
        self._recycle_cache.pop(t, None)
        record = None
        if log is not None:
            log.append(("remove", t, node, pos, trans))
        elif pos < len(th.history):
            record = th.history.pop(pos)
        self._reuse_ok = False
        return record

    def _rollback(self, log) -> None:
        for entry in reversed(log):
            if entry[0] == "recycle":
                _, t, node, pos = entry
                th = self.threads[t]
                assert th.seeds[-1] == node
                th.seeds.pop()
                th.seeds.insert(pos, node)
            elif entry[0] == "accept":
                _, t, node, newly = entry
                th = self.threads[t]
                assert th.seeds[-1] == node
                th.seeds.pop()
                self.seed_len[t] -= 1
                self.seed_mask[t, self._slot(node)] = False
                for i, pair in enumerate(self.pairs):
                    hids = pair.cv.handles_containing(node)
                    if hids:
                        harr = np.asarray(hids)
                        self.cover_mult[i][t, harr] -= 1
                for i, fresh in newly:
                    self.cov[t, i] -= len(fresh)
                    self._shift_gains(t, i, fresh, 1)
            else:
                _, t, node, pos, trans = entry
                th = self.threads[t]
                th.seeds.insert(pos, node)
                self.seed_len[t] += 1
                self.seed_mask[t, self._slot(node)] = True
                for i, pair in enumerate(self.pairs):
                    hids = pair.cv.handles_containing(node)
                    if hids:
                        harr = np.asarray(hids)
                        self.cover_mult[i][t, harr] += 1
                for i, gone in trans:
                    self.cov[t, i] += len(gone)
                    self._shift_gains(t, i, gone, -1)

    # -- greedy passes --

    def _gain_row(self, t: int, ws: np.ndarray) -> np.ndarray:
        gains = ws @ self.G[t]
        return np.where(self.alive & ~self.seed_mask[t], gains, -1.0)

    def _best_candidate(self, t: int, ws: np.ndarray):
        gains = self._gain_row(t, ws)
        g = gains.max() if gains.size else -1.0
        if g < 0.0:
            return None, -1.0
        ties = np.flatnonzero(gains == g)
        if len(ties) == 1:
            return int(self.ids[ties[0]]), float(g)
        return int(self.ids[ties].min()), float(g)

    def _value(self, t: int, ws: np.ndarray) -> float:
        return float(self.cov[t] @ ws)

    def _greedy_insert_thread(self, t, ws, entry, log, persist):
        th = self.threads[t]
        val = self._value(t, ws)
        u = entry
        s = self._slot(u)
        gain = 0.0 if self.seed_mask[t, s] else float(self.G[t, :, s] @ ws)
        while len(th.seeds) < self.k:
            thr = (self.targets[t] - val) / self.k
            if gain < thr:
                break
            if not self.seed_mask[t, self._slot(u)]:
                if persist and th.history and th.history[-1].next_value is None:
                    th.history[-1].next_value = val
                self._accept(t, u, log)
                val = self._value(t, ws)
                if persist:
                    th.history.append(SeedRecord(u, gain, float(thr), val))
            u, gain = self._best_candidate(t, ws)
            if u is None:
                break

    def _sole_cover_counts(self, t: int, node: int):
        """Per-pair member-count vectors of the handles thread t covers only
        through `node`; cached until the thread's seeds change."""
        cached = self._recycle_cache.get(t)
        if cached is not None and cached[0] == node:
            return cached[1]
        cap = self.G.shape[2]
        parts = []
        for i, pair in enumerate(self.pairs):
            hids = pair.cv.handles_containing(node)
            if not hids:
                continue
            harr = np.asarray(hids)
            sole = harr[self.cover_mult[i][t, harr] == 1]
            if len(sole):
                slot_parts = [self._member_slots(i, int(h)) for h in sole]
                touched = slot_parts[0] if len(slot_parts) == 1 else np.concatenate(slot_parts)
                parts.append((i, np.bincount(touched, minlength=cap)))
        self._recycle_cache[t] = (node, parts)
        return parts

    def _try_recycle(self, t, ws, entry, s, log, persist) -> bool:
        """Detect (exactly) that removing `entry` would only re-add it with
        nothing else to do, and perform the cheap equivalent: move the seed
        to the end of the list and refresh its history record.  Returns False
        when the full path must run (including any near-tie)."""
        th = self.threads[t]
        pre = ws @ self.G[t]
        bump = np.zeros(len(pre))
        for i, counts in self._sole_cover_counts(t, entry):
            bump += ws[i] * counts
        entry_post = float(bump[s])
        if entry_post <= 0.0:
            return False
        post = np.where(self.alive & ~self.seed_mask[t], pre + bump, -1.0)
        others_max = float(post.max()) if post.size else -1.0
        eps = 1e-9 * (1.0 + entry_post)
        if entry_post <= others_max + eps:
            return False  # ambiguous or someone else wins: full path
        if len(th.seeds) < self.k:
            pre_masked = np.where(self.alive & ~self.seed_mask[t], pre, -1.0)
            g_next = float(pre_masked.max()) if pre_masked.size else -1.0
            val = self._value(t, ws)
            if g_next >= (self.targets[t] - val) / self.k - eps:
                return False  # the threshold phase might extend the set
        pos = th.seeds.index(entry)
        th.seeds.pop(pos)
        th.seeds.append(entry)
        if persist:
            val = self._value(t, ws)
            if th.history and th.history[-1].next_value is None:
                th.history[-1].next_value = val
            if pos < len(th.history):
                th.history.pop(pos)
            if th.history and th.history[-1].next_value is None:
                # the re-add happens at the post-removal objective value
                th.history[-1].next_value = val - entry_post
            th.history.append(SeedRecord(entry, entry_post, None, val))
        else:
            log.append(("recycle", t, entry, pos))
        return True

    def _greedy_remove_thread(self, t, ws, entry, log, persist):
        th = self.threads[t]
        s = self._slot(entry)
        seeded = bool(self.seed_mask[t, s])
        if not seeded and len(th.seeds) >= self.k:
            return
        if seeded:
            if self._try_recycle(t, ws, entry, s, log, persist):
                return
            if persist and th.history and th.history[-1].next_value is None:
                # close the pending drift window before the prefix changes
                th.history[-1].next_value = self._value(t, ws)
            self._remove_seed(t, entry, log)
        if len(th.seeds) >= self.k:
            return
        val = self._value(t, ws)
        mandatory = True
        while len(th.seeds) < self.k:
            u, gain = self._best_candidate(t, ws)
            if u is None:
                break
            if mandatory:
                if gain <= 0.0:
                    break
                thr = None
            else:
                thr = (self.targets[t] - val) / self.k
                if gain < thr:
                    break
            if persist and th.history and th.history[-1].next_value is None:
                th.history[-1].next_value = val
            self._accept(t, u, log)
            val = self._value(t, ws)
            if persist:
                th.history.append(SeedRecord(u, gain, None if thr is None else float(thr), val))
            mandatory = False

    def _greedy_pass(self, mode: str, ws: np.ndarray, entry: int, log):
        persist = log is None
        if mode == "insert":
            fvals = self.cov @ ws
            thr = (self.targets - fvals) / self.k
            s = self._slot(entry)
            gu = self.G[:, :, s] @ ws
            gu[self.seed_mask[:, s]] = 0.0
            active = np.flatnonzero((self.seed_len < self.k) & (gu >= thr))
            for t in active:
                self._greedy_insert_thread(int(t), ws, entry, log, persist)
            if not len(active):
                return int(np.argmax(fvals))
        else:
            for t in range(len(self.threads)):
                self._greedy_remove_thread(t, ws, entry, log, persist)
        final = self.cov @ ws
        return int(np.argmax(final))

    # -- Find-Seeds --

    def _no_accept_certificate(self, entry: int) -> bool:
        """True when no thread can accept any node for ANY weight vector on
        the simplex, so a Find-Seeds call cannot change thread state.

        The acceptance test is k*gain + F >= target, linear in the weights,
        so its supremum over the simplex is the best single coefficient.  A
        thread already holding the entry node sees gain 0 there.
        """
        s = self._slot(entry)
        gcol = self.k * self.G[:, :, s]
        seeded = self.seed_mask[:, s]
        if seeded.any():
            gcol = np.where(seeded[:, None], 0, gcol)
        worst = ((gcol + self.cov) * self.scales).max(axis=1)
        return bool(np.all((worst < self.targets) | (self.seed_len >= self.k)))

    def _no_accept_under_weights(self, entry: int) -> bool:
        """Same question, but only for the exact weight trajectory cached
        from the previous call (valid while thread/coverage state for every
        thread is unchanged)."""
        if self._w_stack is None:
            return False
        if self._w_cache is None:
            ws_all = (self._w_stack * self.scales).T       # (l, T+1)
            fv = self.cov @ ws_all
            thr_ok = (self.targets[:, None] - fv) / self.k
            thr_ok[self.seed_len >= self.k] = np.inf       # full threads never accept
            self._w_cache = (ws_all, thr_ok)
        ws_all, thr = self._w_cache
        s = self._slot(entry)
        gu = self.G[:, :, s] @ ws_all                      # (tc, T+1)
        seeded = self.seed_mask[:, s]
        if seeded.any():
            gu[seeded] = 0.0
        return not bool((gu >= thr).any())

    def _batch_no_accept(self, finalize: bool) -> SeedSolution:
        """Closed-form Find-Seeds when no thread can accept anything: only
        the weight dynamics and the per-iteration winners are computed.

        The common case (one thread wins every iteration) is evaluated
        speculatively; the element order of every float operation matches
        the plain loop, so results are bit-identical.
        """
        l = self.l
        T = self.T
        n_scale = max(1, self.n_live)
        ws_u = self.scales / l
        # iteration 1 runs under uniform weights
        first_vals = self.cov @ ((np.ones(l) / l) * self.scales)
        winner0 = int(np.argmax(first_vals))
        f_row0 = self.cov[winner0] * self.scales
        # speculate that winner0 keeps winning: replay the loss recursion
        loss_stack = np.cumsum(np.tile(f_row0 / n_scale, (T, 1)), axis=0)
        w_stack = np.empty((T + 1, l))
        w_stack[0] = 1.0 / l
        if l > 1:
            z = loss_stack[: T - 1] - loss_stack[: T - 1].min(axis=1, keepdims=True)
            ew = np.exp(-self.eta * z)
            w_stack[1:T] = ew / ew.sum(axis=1, keepdims=True)
        else:
            w_stack[1:T] = 1.0
        stable = True
        for j in range(1, T):
            if int(np.argmax(self.cov @ (w_stack[j] * self.scales))) != winner0:
                stable = False
                break
        if stable:
            candidates = [tuple(self.threads[winner0].seeds)] * T
            f_rows = np.tile(f_row0, (T, 1))
            w_stack[T] = 1.0 / l
            uni_vals = self.cov @ ws_u
            winner = int(np.argmax(uni_vals))
        else:
            candidates = []
            rows = []
            losses = np.zeros(l)
            for j in range(T):
                w = hedge_weights(self.eta, losses)
                w_stack[j] = w
                win_j = int(np.argmax(self.cov @ (w * self.scales)))
                candidates.append(tuple(self.threads[win_j].seeds))
                row = self.cov[win_j] * self.scales
                rows.append(row)
                losses = losses + row / n_scale
            f_rows = np.array(rows)
            w_stack[T] = 1.0 / l
            uni_vals = self.cov @ ws_u
            winner = int(np.argmax(uni_vals))
        best_thread = self.threads[winner]
        gamma = snapshot_trace(best_thread, float(uni_vals[winner]))
        union = tuple(sorted(set().union(*candidates))) if candidates else ()
        sol = SeedSolution(tuple(candidates), union, None, tuple(best_thread.seeds),
                           gamma, f_rows)
        if finalize:
            sol.per_theta_values = self.union_values(sol.union)
        self._cached = sol
        self._w_stack = w_stack
        self._w_cache = None
        self._reuse_ok = True
        return sol

    def _speculative_w_stack(self) -> np.ndarray | None:
        """Weight trajectory assuming one thread wins every iteration and no
        thread state changes; None when the winner is not stable."""
        l, T = self.l, self.T
        n_scale = max(1, self.n_live)
        winner0 = int(np.argmax(self.cov @ ((np.ones(l) / l) * self.scales)))
        f_row0 = self.cov[winner0] * self.scales
        loss_stack = np.cumsum(np.tile(f_row0 / n_scale, (T, 1)), axis=0)
        w_stack = np.empty((T + 1, l))
        w_stack[0] = 1.0 / l
        if l > 1 and T > 1:
            z = loss_stack[: T - 1] - loss_stack[: T - 1].min(axis=1, keepdims=True)
            ew = np.exp(-self.eta * z)
            w_stack[1:T] = ew / ew.sum(axis=1, keepdims=True)
        else:
            w_stack[1:T] = 1.0 / l
        w_stack[T] = 1.0 / l
        for j in range(1, T):
            if int(np.argmax(self.cov @ (w_stack[j] * self.scales))) != winner0:
                return None
        return w_stack

    def _entry_sole_counts(self, entry: int) -> np.ndarray:
        """(tc, l) matrix: per thread and pair, how many handles contain the
        entry with cover multiplicity exactly one."""
        tc = len(self.threads)
        out = np.zeros((tc, self.l), dtype=np.int64)
        for i, pair in enumerate(self.pairs):
            hids = pair.cv.handles_containing(entry)
            if hids:
                out[:, i] = (self.cover_mult[i][:, np.asarray(hids)] == 1).sum(axis=1)
        return out

    def _try_batch_remove(self, entry: int, finalize: bool) -> SeedSolution | None:
        """Vectorized removal event: valid when every thread either skips or
        recycles the entry for every weight vector of the call, so nothing
        but seed order can change.  Returns None when any thread might do
        real work (the exact per-thread path must run then)."""
        s = self._slot(entry)
        seeded = self.seed_mask[:, s].copy()
        below = self.seed_len < self.k
        loose = below & ~seeded & (self.maxG.max(axis=1) > 0)
        if loose.any():
            for t in np.flatnonzero(loose):  # tighten the stale bounds once
                self.maxG[t] = self.G[t].max(axis=1)
            if (below & ~seeded & (self.maxG.max(axis=1) > 0)).any():
                return None  # some thread would mandatory-add a node
        w_stack = self._speculative_w_stack()
        if w_stack is None:
            return None
        ws_all = (w_stack * self.scales).T              # (l, P)
        fv = self.cov @ ws_all                          # (tc, P)
        sole_counts = None
        if seeded.any():
            sole_counts = self._entry_sole_counts(entry)
            entry_post = sole_counts @ ws_all
            thr = (self.targets[:, None] - fv) / self.k
            at_cap = (self.seed_len >= self.k)[:, None]
            eps = 1e-9 * (1.0 + float(entry_post.max()))
            for attempt in range(2):
                bound = self.maxG @ ws_all
                ok = ~seeded[:, None] | (
                    (entry_post > bound + eps) & (at_cap | (bound < thr - eps)))
                if bool(ok.all()):
                    break
                if attempt:
                    return None
                for t in np.flatnonzero(~ok.all(axis=1) & seeded):
                    self.maxG[t] = self.G[t].max(axis=1)  # tighten stale bounds
            else:
                return None
        # every pass only recycles: replay the dynamics against static values
        T = self.T
        winners = [int(np.argmax(fv[:, j])) for j in range(T)]
        candidates = []
        for win in winners:
            seeds_j = self.threads[win].seeds
            if seeded[win]:
                seeds_j = [v for v in seeds_j if v != entry] + [entry]
            candidates.append(tuple(seeds_j))
        f_rows = np.array([self.cov[w] * self.scales for w in winners])
        # persist pass: recycle the entry in every seeded thread (ascending)
        ws_u = self.scales / self.l
        sole_uni = sole_counts @ ws_u if sole_counts is not None else None
        for t in np.flatnonzero(seeded):
            th = self.threads[t]
            val = self._value(int(t), ws_u)
            g_uni = float(sole_uni[t])
            pos = th.seeds.index(entry)
            th.seeds.pop(pos)
            th.seeds.append(entry)
            if th.history and th.history[-1].next_value is None:
                th.history[-1].next_value = val
            if pos < len(th.history):
                th.history.pop(pos)
            if th.history and th.history[-1].next_value is None:
                th.history[-1].next_value = val - g_uni
            th.history.append(SeedRecord(entry, g_uni, None, val))
        uni_vals = self.cov @ ws_u
        winner = int(np.argmax(uni_vals))
        best_thread = self.threads[winner]
        gamma = snapshot_trace(best_thread, float(uni_vals[winner]))
        union = tuple(sorted(set().union(*candidates))) if candidates else ()
        sol = SeedSolution(tuple(candidates), union, None, tuple(best_thread.seeds),
                           gamma, f_rows)
        if finalize:
            sol.per_theta_values = self.union_values(sol.union)
        self._cached = None
        self._w_stack = None
        self._w_cache = None
        self._reuse_ok = False
        return sol

    def find_seeds(self, entry: int, mode: str, finalize: bool = True) -> SeedSolution:
        if mode == "remove" and self.enable_batch:
            sol = self._try_batch_remove(entry, finalize)
            if sol is not None:
                return sol
        if mode == "insert" and self.enable_batch:
            reusable = self._reuse_ok and self._cached is not None
            if self._no_accept_certificate(entry):
                # nothing can be accepted: the cached result stands if the
                # state is untouched, otherwise replay just the dynamics
                if reusable:
                    if finalize and self._cached.per_theta_values is None:
                        self._cached.per_theta_values = self.union_values(self._cached.union)
                    return self._cached
                return self._batch_no_accept(finalize)
            if reusable and self._no_accept_under_weights(entry):
                if finalize and self._cached.per_theta_values is None:
                    self._cached.per_theta_values = self.union_values(self._cached.union)
                return self._cached
        self._recycle_cache.clear()  # pair state may have moved since last call
        l = self.l
        losses = np.zeros(l)
        candidates = []
        f_rows = []
        w_stack = np.empty((self.T + 1, l))
        mutated = False
        for j in range(self.T):
            w = hedge_weights(self.eta, losses)
            w_stack[j] = w
            ws = w * self.scales
            log: list = []
            winner = self._greedy_pass(mode, ws, entry, log)
            candidates.append(tuple(self.threads[winner].seeds))
            f_row = self.cov[winner] * self.scales
            f_rows.append(f_row)
            if log:
                mutated = True
                self._rollback(log)
            losses = losses + f_row / max(1, self.n_live)
        before = self.seed_len.sum()
        ws_u = self.scales / l
        w_stack[self.T] = 1.0 / l
        winner = self._greedy_pass(mode, ws_u, entry, None)
        if mode == "remove" or self.seed_len.sum() != before:
            mutated = True
        best_thread = self.threads[winner]
        gamma = snapshot_trace(best_thread, self._value(winner, ws_u))
        union = tuple(sorted(set().union(*candidates))) if candidates else ()
        sol = SeedSolution(
            candidates=tuple(candidates),
            union=union,
            per_theta_values=None,
            best=tuple(best_thread.seeds),
            gamma=gamma,
            f_rows=np.array(f_rows),
        )
        if finalize:
            sol.per_theta_values = self.union_values(sol.union)
        if mode == "insert" and not mutated:
            self._cached = sol
            self._w_stack = w_stack
            self._w_cache = None
            self._reuse_ok = True
        else:
            self._cached = None
            self._w_stack = None
            self._w_cache = None
            self._reuse_ok = False
        return sol

    def union_values(self, union) -> np.ndarray:
        return np.array([f_cv(p, union) for p in self.pairs])

    def best_objective_uniform(self) -> float:
        """Current uniform-weight objective of the best thread."""
        ws_u = self.scales / self.l
        vals = self.cov @ ws_u
        return float(vals.max()) if len(vals) else 0.0

    def stale_seeds(self) -> list[int]:
        dead = self.seed_mask[:, ~self.alive[: self.seed_mask.shape[1]]]
        if not dead.any():
            return []
        out = set()
        for th in self.threads:
            for v in th.seeds:
                if not self.alive[self._slot(v)]:
                    out.add(v)
        return sorted(out)

    # -- audits --

    def audit(self) -> None:
        """Recompute covered sets and marginal counts from the pair indexes
        and compare against the incremental state."""
        for t, th in enumerate(self.threads):
            assert len(th.seeds) <= self.k, f"thread {t} over budget"
            assert len(set(th.seeds)) == len(th.seeds), f"thread {t} repeats a seed"
            verify_thread_certificates(th)
            for i, pair in enumerate(self.pairs):
                cm = self.cover_mult[i]
                counts: dict[int, int] = {}
                for v in th.seeds:
                    for hid in pair.cv.handles_containing(v):
                        counts[hid] = counts.get(hid, 0) + 1
                nz = np.flatnonzero(cm[t])
                assert {int(h): int(cm[t, h]) for h in nz} == counts, \
                    f"thread {t} pair {i}: cover multiplicity drift"
                assert self.cov[t, i] == len(counts), f"thread {t} pair {i}: cov drift"
                covered = set(counts)
                for s in range(self.used):
                    v = int(self.ids[s])
                    expect = 0
                    if self.alive[s]:
                        expect = sum(1 for hid in pair.cv.handles_containing(v)
                                     if hid not in covered)
                    elif v in pair.cv.node_index and pair.cv.node_index[v]:
                        expect = sum(1 for hid in pair.cv.handles_containing(v)
                                     if hid not in covered)
                    assert self.G[t, i, s] == expect, \
                        f"thread {t} pair {i} node {v}: gain count drift"
