import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedstream.coverage import build_coverage_pair, cv_insert_edge, f_cv
from seedstream.rrsets import RateEstimate
from seedstream.seeding import (
    GammaTrace,
    GreedyLattice,
    MWUState,
    build_lattice,
    gamma_of_trace,
    greedy_insert,
    greedy_remove,
    hedge_eta,
    make_threads,
    mwu_weights,
    snapshot_trace,
    thread_count,
    verify_thread_certificates,
    weighted_objective,
)

from conftest import build_graph, const_prob_setup


def make_pairs(g, p_edge, p_rate_num, seeds=(0, 1), l=2):
    """Pairs sharing one probability level but independent RR randomness."""
    model, theta = const_prob_setup(p_edge)
    return [
        build_coverage_pair(g, theta, RateEstimate(p_rate_num, g.n),
                            np.random.default_rng(s), model=model, index=i)
        for i, s in zip(range(l), seeds)
    ]


def brute_force_best(F, nodes, k):
    best_v, best_s = -1.0, set()
    for r in range(k + 1):
        for sub in itertools.combinations(nodes, r):
            v = F(list(sub))
            if v > best_v:
                best_v, best_s = v, set(sub)
    return best_s, best_v


# -- MWU ----------------------------------------------------------------------


def test_mwu_weights_uniform_cases():
    state = MWUState(eta=1.0)
    state.record([1.0, 1.0, 1.0])
    assert np.allclose(mwu_weights(state, 1), [1 / 3] * 3)  # empty prefix
    state.record([2.0, 2.0, 2.0])
    assert np.allclose(mwu_weights(state, 3), [1 / 3] * 3)  # identical history


def test_mwu_weights_formula():
    state = MWUState(eta=1.0)
    state.record([1.0, 0.0])
    w = mwu_weights(state, 2)
    expect = np.array([math.exp(-1.0), 1.0])
    expect /= expect.sum()
    assert np.allclose(w, expect)
    assert w[0] == pytest.approx(0.2689, abs=1e-4)
    assert w[1] == pytest.approx(0.7311, abs=1e-4)


@settings(max_examples=30)
@given(st.integers(0, 9999))
def test_mwu_direction(seed):
    rng = np.random.default_rng(seed)
    rows = rng.uniform(0, 5, size=(4, 2))
    rows[:, 0] = rows[:, 1] - rng.uniform(0.1, 1.0, 4)  # pair 0 always worse
    state = MWUState(eta=0.5)
    for row in rows:
        state.record(row)
    w = mwu_weights(state, 5)
    assert w[0] > w[1]
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w > 0)


def test_weighted_objective_trivials():
    g = build_graph(4, [(0, 1), (2, 3)])
    pairs = make_pairs(g, 1.0, 4, l=4, seeds=(0, 1, 2, 3))
    F = weighted_objective([0, 0, 0, 1], pairs)
    assert F([2]) == f_cv(pairs[3], [2])
    assert F([]) == 0.0
    uni = weighted_objective([0.25] * 4, pairs)
    same = make_pairs(g, 1.0, 4, l=2, seeds=(7, 7))
    F2 = weighted_objective([0.5, 0.5], same)
    assert F2([0]) == pytest.approx(f_cv(same[0], [0]))


# -- gamma --------------------------------------------------------------------


def test_gamma_trace_basics():
    flat = GammaTrace((0.0, 0.0, 0.0), k=3)
    assert gamma_of_trace(flat, 5.0, "incremental") == 0.0
    assert gamma_of_trace(flat, 5.0, "fully_dynamic") == 0.0
    single = GammaTrace((0.9,), k=3)
    gi = gamma_of_trace(single, 2.0, "incremental")
    gf = gamma_of_trace(single, 2.0, "fully_dynamic")
    assert gi == gf == pytest.approx(0.45)
    with pytest.raises(ValueError):
        gamma_of_trace(single, 0.0, "incremental")


@settings(max_examples=40)
@given(st.lists(st.floats(0, 2), min_size=1, max_size=6), st.integers(1, 5))
def test_gamma_incremental_below_fully_dynamic_for_nonneg(deltas, k):
    trace = GammaTrace(tuple(deltas), k=k)
    gi = gamma_of_trace(trace, 3.0, "incremental")
    gf = gamma_of_trace(trace, 3.0, "fully_dynamic")
    assert gi <= gf + 1e-12


# -- reference greedy ---------------------------------------------------------


def test_greedy_insert_zero_objective():
    threads = make_threads(8, 0.1)
    best = greedy_insert(threads, lambda s: 0.0, 3, k=2, eps1=0.1, universe=range(8))
    assert best == []
    assert all(th.seeds == [] for th in threads)


def test_greedy_insert_disjoint_max_coverage():
    # three disjoint singleton handles: nodes 0, 1, 2 each cover one
    g = build_graph(3, [])
    pairs = make_pairs(g, 1.0, 3, l=1, seeds=(0,))
    F = weighted_objective([1.0], pairs)
    threads = make_threads(3, 0.1)
    best = greedy_insert(threads, F, 0, k=3, eps1=0.1, universe=range(3))
    assert sorted(best) == [0, 1, 2]
    _, opt = brute_force_best(F, range(3), 3)
    assert F(best) == pytest.approx(opt)


@pytest.mark.parametrize("seed", range(6))
def test_greedy_insert_lemma_bound(seed):
    rng = np.random.default_rng(seed)
    g = build_graph(8, [])
    for u in range(8):
        for v in range(8):
            if u != v and rng.random() < 0.2:
                g.add_edge(u, v)
    pairs = make_pairs(g, 1.0, 8, l=2, seeds=(seed, seed + 50))
    w = [0.5, 0.5]
    F = weighted_objective(w, pairs)
    threads = make_threads(8, 0.1)
    best = greedy_insert(threads, F, int(rng.integers(8)), k=2, eps1=0.1,
                         universe=range(8))
    _, opt = brute_force_best(F, range(8), 2)
    # fresh threads against a static objective: the drift term is zero
    assert F(best) >= (1 - 1 / math.e - 0.1) * opt - 1e-9
    for th in threads:
        verify_thread_certificates(th)


def test_greedy_remove_re_add_unchanged():
    g = build_graph(3, [])
    pairs = make_pairs(g, 1.0, 3, l=1, seeds=(0,))
    F = weighted_objective([1.0], pairs)
    threads = make_threads(3, 0.1)
    greedy_insert(threads, F, 0, k=1, eps1=0.1, universe=range(3))
    assert threads[0].seeds == [0]
    # node 0 still has the (equal) best gain: removed then re-added in place
    best = greedy_remove(threads, F, 0, k=1, eps1=0.1, universe=range(3))
    assert threads[0].seeds == [0]
    assert F(best) == pytest.approx(brute_force_best(F, range(3), 1)[1])


def test_greedy_remove_empty_gain_landscape():
    threads = make_threads(4, 0.1)
    best = greedy_remove(threads, lambda s: 0.0, 2, k=2, eps1=0.1, universe=range(4))
    assert best == []
    assert all(th.seeds == [] for th in threads)


def test_greedy_remove_replacement():
    # before: node 0 covers two handles, nodes 1 and 2 one each; after node 0
    # drops out of its handles, node 1 (smallest id among the best) replaces it
    from seedstream.coverage import CoverageGraph, CoveragePair
    from seedstream.rrsets import RRSet

    cv = CoverageGraph()
    for members in ([0, 3], [0, 4], [1, 5], [2]):
        cv.add_handle(RRSet(members[0], set(members), [], []))
    for v in range(6):
        cv.left.add(v)
    pair = CoveragePair(0, np.zeros(2), RateEstimate(6, 6), CoverageGraph(), cv, None)
    F = weighted_objective([1.0], [pair])
    threads = make_threads(6, 0.1)
    best = greedy_insert(threads, F, 0, k=1, eps1=0.1, universe=range(6))
    assert best == [0]
    # the coverage event: node 0 leaves both of its handles
    cv.remove_membership(0, 0)
    cv.remove_membership(1, 0)
    best = greedy_remove(threads, F, 0, k=1, eps1=0.1, universe=range(6))
    exhaustive, opt = brute_force_best(F, range(6), 1)
    assert F(best) == pytest.approx(opt)
    assert best == [1] and exhaustive <= {1, 2}


# -- lattice ------------------------------------------------------------------


def sync_lattice(g, pairs, k, eps1=0.1, T=2, mode="incremental"):
    return build_lattice(pairs, k, eps1, T, g.node_ids(), mode)


def test_thread_count_formula():
    assert thread_count(1, 0.1) == 1
    assert thread_count(100, 0.1) == math.ceil(math.log(100) / 0.1) + 1


@pytest.mark.parametrize("seed", range(5))
def test_lattice_matches_reference_greedy(seed):
    rng = np.random.default_rng(seed)
    g = build_graph(8, [])
    for u in range(8):
        for v in range(8):
            if u != v and rng.random() < 0.25:
                g.add_edge(u, v)
    pairs = make_pairs(g, 1.0, 16, l=2, seeds=(seed, seed + 9))  # scale 0.5, exact
    lat = sync_lattice(g, pairs, k=3)
    ref_threads = make_threads(8, 0.1)
    w = np.array([0.25, 0.75])
    F = weighted_objective(w, pairs)
    entry = int(rng.integers(8))
    ws = w * lat.scales
    winner = lat._greedy_pass("insert", ws, entry, None)
    greedy_insert(ref_threads, F, entry, k=3, eps1=0.1, universe=range(8))
    for t, th in enumerate(ref_threads):
        assert lat.threads[t].seeds == th.seeds, f"thread {t} diverged"
    best_ref = max(ref_threads, key=lambda th: (F(th.seeds), -th.index))
    assert lat.threads[winner].seeds == best_ref.seeds
    lat.audit()


@pytest.mark.parametrize("seed", range(3))
def test_lattice_matches_reference_remove(seed):
    rng = np.random.default_rng(100 + seed)
    g = build_graph(7, [])
    for u in range(7):
        for v in range(7):
            if u != v and rng.random() < 0.3:
                g.add_edge(u, v)
    pairs = make_pairs(g, 1.0, 7, l=1, seeds=(seed,))
    lat = sync_lattice(g, pairs, k=2)
    ref_threads = make_threads(7, 0.1)
    F = weighted_objective([1.0], pairs)
    greedy_insert(ref_threads, F, 0, k=2, eps1=0.1, universe=range(7))
    lat._greedy_pass("insert", lat.scales.copy(), 0, None)
    # remove a seed-ish node's coverage event
    target = ref_threads[0].seeds[0] if ref_threads[0].seeds else 0
    greedy_remove(ref_threads, F, target, k=2, eps1=0.1, universe=range(7))
    lat._greedy_pass("remove", lat.scales.copy(), target, None)
    for t, th in enumerate(ref_threads):
        assert lat.threads[t].seeds == th.seeds, f"thread {t} diverged"
    lat.audit()


def test_find_seeds_single_iteration():
    g = build_graph(5, [(0, 1), (1, 2), (3, 4)])
    pairs = make_pairs(g, 1.0, 5, l=2, seeds=(3, 4))
    lat = sync_lattice(g, pairs, k=2, T=1)
    sol = lat.find_seeds(0, "insert")
    assert len(sol.candidates) == 1
    assert sol.union == tuple(sorted(sol.candidates[0]))
    assert sol.per_theta_values is not None


def test_find_seeds_single_pair_union_capped():
    g = build_graph(6, [(i, i + 1) for i in range(5)])
    pairs = make_pairs(g, 0.8, 6, l=1, seeds=(2,))
    lat = sync_lattice(g, pairs, k=2, T=4)
    sol = lat.find_seeds(0, "insert")
    assert len(sol.candidates) == 4
    assert len(set(sol.candidates)) == 1  # l=1: every iteration identical
    assert len(sol.union) <= 2


def test_find_seeds_robust_bound_small():
    rng = np.random.default_rng(5)
    g = build_graph(8, [])
    for u in range(8):
        for v in range(8):
            if u != v and rng.random() < 0.25:
                g.add_edge(u, v)
    pairs = make_pairs(g, 1.0, 8, l=2, seeds=(1, 2))
    T = 8
    lat = sync_lattice(g, pairs, k=2, T=T)
    sol = lat.find_seeds(3, "insert")
    f_means = sol.f_rows.mean(axis=0)
    # exhaustive max-min over all 2-subsets
    best = max(
        min(f_cv(p, sub) for p in pairs)
        for sub in itertools.combinations(range(8), 2)
    )
    eps1, eps2 = 0.1, 0.5
    gamma = 0.0  # single static call
    assert f_means.min() >= (1 - 1 / math.e - gamma - eps1) * best - eps2 - 1e-9
    assert len(sol.union) <= T * 2


def test_incremental_freeze_monotone():
    rng = np.random.default_rng(3)
    g = build_graph(6, [])
    pairs = make_pairs(g, 1.0, 6, l=2, seeds=(0, 1))
    lat = sync_lattice(g, pairs, k=2, T=2)
    prev = None
    for step in range(6):
        absent = [(u, v) for u in range(6) for v in range(6)
                  if u != v and not g.has_edge(u, v)]
        e = absent[int(rng.integers(len(absent)))]
        g.add_edge(*e)
        for i, pair in enumerate(pairs):
            events = cv_insert_edge(pair, g, e, rng, defer=True)
            for (node, hid) in events:
                pair.cv.add_membership(hid, node)
                lat.materialize_insert(i, node, hid)
                sol = lat.find_seeds(node, "insert", finalize=False)
        cur = [list(th.seeds) for th in lat.threads]
        if prev is not None:
            for old, new in zip(prev, cur):
                assert new[: len(old)] == old  # seeds only ever appended
        prev = cur
    lat.audit()


def test_gamma_snapshot_and_certificates_after_drift():
    g = build_graph(6, [])
    pairs = make_pairs(g, 1.0, 6, l=1, seeds=(0,))
    lat = sync_lattice(g, pairs, k=3, T=2)
    rng = np.random.default_rng(9)
    g.add_edge(0, 1)
    for i, pair in enumerate(pairs):
        for (node, hid) in cv_insert_edge(pair, g, (0, 1), rng, defer=True):
            pair.cv.add_membership(hid, node)
            lat.materialize_insert(i, node, hid)
            sol = lat.find_seeds(node, "insert", finalize=False)
            assert sol.gamma is not None
            g_inc = gamma_of_trace(sol.gamma, max(1e-9, lat.best_objective_uniform()),
                                   "incremental")
            assert g_inc <= 1e-9  # coverage only grew
    lat.audit()


def _drive_both(seed, n=8, steps=8, k=3, T=4, l=2, mode_removals=True):
    """Run identical event sequences through a batching and a non-batching
    lattice over shared pair state; they must agree exactly on seeds."""
    from seedstream.coverage import cv_remove_edge

    rng_g = np.random.default_rng(seed)
    g = build_graph(n, [])
    for u in range(n):
        for v in range(n):
            if u != v and rng_g.random() < 0.35:
                g.add_edge(u, v)
    pairs = make_pairs(g, 1.0, 2 * n, l=l, seeds=(seed, seed + 77))  # scale 0.5
    lat_a = build_lattice(pairs, k, 0.1, T, g.node_ids(), mode="fully_dynamic")
    lat_b = build_lattice(pairs, k, 0.1, T, g.node_ids(), mode="fully_dynamic")
    lat_b.enable_batch = False
    rng = np.random.default_rng(seed + 1000)
    for _ in range(steps):
        if mode_removals and g.m and rng.random() < 0.5:
            e = sorted(g.edges)[rng.integers(g.m)]
            g.remove_edge(*e)
            for i, pair in enumerate(pairs):
                events = cv_remove_edge(pair, g, e, defer=True)
                for (node, hid) in events:
                    pair.cv.remove_membership(hid, node)
                    lat_a.materialize_remove(i, node, hid)
                    lat_b.materialize_remove(i, node, hid)
                    sa = lat_a.find_seeds(node, "remove", finalize=False)
                    sb = lat_b.find_seeds(node, "remove", finalize=False)
                    assert sa.candidates == sb.candidates
                    assert sa.best == sb.best
        else:
            absent = [(u, v) for u in range(n) for v in range(n)
                      if u != v and not g.has_edge(u, v)]
            if not absent:
                continue
            e = absent[rng.integers(len(absent))]
            g.add_edge(*e)
            for i, pair in enumerate(pairs):
                events = cv_insert_edge(pair, g, e, rng, defer=True)
                for (node, hid) in events:
                    pair.cv.add_membership(hid, node)
                    lat_a.materialize_insert(i, node, hid)
                    lat_b.materialize_insert(i, node, hid)
                    sa = lat_a.find_seeds(node, "insert", finalize=False)
                    sb = lat_b.find_seeds(node, "insert", finalize=False)
                    assert sa.candidates == sb.candidates
                    assert sa.best == sb.best
        for ta, tb in zip(lat_a.threads, lat_b.threads):
            assert ta.seeds == tb.seeds
        assert np.array_equal(lat_a.cov, lat_b.cov)
        assert np.array_equal(lat_a.seed_mask, lat_b.seed_mask)
    lat_a.audit()
    lat_b.audit()


@pytest.mark.parametrize("seed", range(6))
def test_batched_fast_paths_match_exact_execution(seed):
    _drive_both(seed)
