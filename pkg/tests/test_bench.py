import itertools
import math
import subprocess
import sys

import numpy as np
import pytest

from seedstream.bench import (
    StreamSpec,
    TraceRow,
    gen_stream,
    gen_synthetic,
    run_experiment,
    write_trace_csv,
)
from seedstream.engine import EngineConfig
from seedstream.graphs import (
    InsertNode,
    RemoveEdge,
    RemoveNode,
    apply_update,
    save_graph,
)
from seedstream.oracles import (
    SizeError,
    brute_force_robust_opt,
    exact_spread,
    min_spread,
    monte_carlo_spread,
    probs_from_theta,
)

from conftest import build_graph, const_prob_setup


def test_gen_synthetic_saturated_and_dims():
    g = gen_synthetic(2, 2, 3, np.random.default_rng(0))
    assert g.edges == {(0, 1), (1, 0)}
    assert g.edge_dim == 6
    with pytest.raises(ValueError):
        gen_synthetic(2, 3, 3, np.random.default_rng(0))


def test_gen_synthetic_deterministic_file(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    save_graph(gen_synthetic(12, 24, 3, np.random.default_rng(9)), a)
    save_graph(gen_synthetic(12, 24, 3, np.random.default_rng(9)), b)
    assert a.read_text() == b.read_text()


def test_gen_stream_incremental_and_count():
    g = gen_synthetic(10, 20, 3, np.random.default_rng(1))
    stream = gen_stream(g, StreamSpec(40, "incremental"), np.random.default_rng(2))
    assert len(stream) == 40
    assert not any(isinstance(u, (RemoveNode, RemoveEdge)) for u in stream)
    sim = g.copy()
    for u in stream:
        apply_update(sim, u)  # raises if any update is invalid


def test_gen_stream_fully_dynamic_validity():
    g = gen_synthetic(8, 16, 3, np.random.default_rng(3))
    stream = gen_stream(g, StreamSpec(60, "fully_dynamic"), np.random.default_rng(4))
    sim = g.copy()
    kinds = set()
    for u in stream:
        kinds.add(type(u).__name__)
        apply_update(sim, u)
    assert {"InsertNode", "InsertEdge", "RemoveNode", "RemoveEdge"} <= kinds


def test_incremental_spec_rejects_removals():
    with pytest.raises(ValueError):
        StreamSpec(5, "incremental", {"+n": 0.5, "-e": 0.5})


def test_exact_spread_hand_cases():
    g1 = build_graph(1, [])
    assert exact_spread(g1, {}, [0]) == 1.0

    g2 = build_graph(2, [(0, 1)])
    assert exact_spread(g2, {(0, 1): 0.3}, [0]) == pytest.approx(1.3)

    g3 = build_graph(3, [(0, 1), (1, 2)])
    val = exact_spread(g3, {(0, 1): 0.25, (1, 2): 0.5}, [0])
    assert val == pytest.approx(1 + 0.25 + 0.25 * 0.5)


def test_exact_spread_size_guard():
    g = build_graph(22, [(i, i + 1) for i in range(21)])
    with pytest.raises(SizeError):
        exact_spread(g, {e: 0.5 for e in g.edges}, [0])


def test_monte_carlo_trivials(rng):
    g = build_graph(4, [(0, 1), (1, 2)])
    model, theta = const_prob_setup(0.5)
    assert monte_carlo_spread(g, theta, model, [], 100, rng) == (0.0, 0.0)
    mean, se = monte_carlo_spread(g, theta, model, list(range(4)), 50, rng)
    assert mean == 4.0 and se == 0.0


def test_monte_carlo_matches_exact():
    g = build_graph(2, [(0, 1)])
    model, theta = const_prob_setup(0.3)
    mean, se = monte_carlo_spread(g, theta, model, [0], 100_000,
                                  np.random.default_rng(6))
    assert abs(mean - 1.3) < 3 * se


def test_min_spread_degenerate_cases(rng):
    g = build_graph(3, [(0, 1), (1, 2)])
    model, theta = const_prob_setup(0.4)
    single = min_spread(g, [theta], model, [0], 2000, np.random.default_rng(1))
    dup = min_spread(g, [theta, theta], model, [0], 2000, np.random.default_rng(1))
    assert single > 1.0
    assert abs(single - dup) < 0.15  # duplicates: same distribution


def test_brute_force_trivials():
    model, theta = const_prob_setup(1.0)
    g = build_graph(4, [(0, 1), (2, 3)])
    best, val = brute_force_robust_opt(g, [theta], model, 1)
    assert val == pytest.approx(2.0)
    assert best in ({0}, {2})
    best_all, val_all = brute_force_robust_opt(g, [theta], model, 3)
    assert val_all >= val
    big = build_graph(13, [])
    with pytest.raises(SizeError):
        brute_force_robust_opt(big, [theta], model, 2)


def _independent_robust_enumerator(g, thetas, model, k):
    """Second implementation: per-theta expected spread via direct summation
    over live-edge subsets with per-subset reachability from each subset."""
    edges = sorted(g.edges)
    nodes = g.node_ids()
    best_val, best_set = -1.0, None
    for sub in itertools.combinations(nodes, k):
        worst = math.inf
        for theta in thetas:
            probs = probs_from_theta(g, model, theta)
            total = 0.0
            for bits in itertools.product([0, 1], repeat=len(edges)):
                w = 1.0
                adj = {}
                for keep, e in zip(bits, edges):
                    if keep:
                        w *= probs[e]
                        adj.setdefault(e[0], []).append(e[1])
                    else:
                        w *= 1 - probs[e]
                seen = set(sub)
                frontier = list(sub)
                while frontier:
                    nxt = []
                    for u in frontier:
                        for v in adj.get(u, ()):
                            if v not in seen:
                                seen.add(v)
                                nxt.append(v)
                    frontier = nxt
                total += w * len(seen)
            worst = min(worst, total)
        if worst > best_val:
            best_val, best_set = worst, set(sub)
    return best_set, best_val


def test_brute_force_against_independent_enumerator():
    rng = np.random.default_rng(12)
    g = build_graph(8, [])
    while g.m < 10:
        u, v = int(rng.integers(8)), int(rng.integers(8))
        if u != v and not g.has_edge(u, v):
            g.add_edge(u, v)
    model, _ = const_prob_setup(0.5)
    thetas = [np.array([0.3, 0.25]), np.array([0.2, 0.15])]
    got_set, got_val = brute_force_robust_opt(g, thetas, model, 2)
    exp_set, exp_val = _independent_robust_enumerator(g, thetas, model, 2)
    assert got_val == pytest.approx(exp_val, rel=1e-9)
    assert got_set == exp_set


def _experiment_config(**kw):
    base = dict(k=2, l=2, T=2, d=2, model_kind="linear",
                center=np.array([0.35, 0.35]), B=0.1, seed=1)
    base.update(kw)
    return EngineConfig(**base)


@pytest.mark.parametrize("algo", ["engine", "base"])
def test_run_experiment_trace_shape(tmp_path, algo):
    g = gen_synthetic(10, 20, 1, np.random.default_rng(2))
    stream = gen_stream(g, StreamSpec(8, "incremental"), np.random.default_rng(3))
    result = run_experiment(g.copy(), stream, _experiment_config(), algo,
                            eval_runs=500, eval_stride=4)
    assert len(result.rows) == len(stream) + 1
    assert [r.step for r in result.rows] == list(range(len(stream) + 1))
    evaluated = [r.min_spread is not None for r in result.rows]
    assert evaluated[0] and evaluated[4] and evaluated[-1]
    assert result.final_min_spread is not None
    times = [r.cum_ns for r in result.rows]
    assert all(a <= b for a, b in zip(times, times[1:]))
    path = tmp_path / "trace.csv"
    write_trace_csv(result.rows, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "step,cum_ns,min_spread,restarts"
    assert len(lines) == len(stream) + 2


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "seedstream.cli", *args],
                          capture_output=True, text=True)


def test_cli_pipeline(tmp_path):
    gpath, upath = str(tmp_path / "g.txt"), str(tmp_path / "u.txt")
    tpath, spath = str(tmp_path / "t.csv"), str(tmp_path / "s.json")
    assert _cli("gen-graph", "--n0", "10", "--m0", "20", "--seed", "3",
                "--out", gpath).returncode == 0
    assert _cli("gen-updates", "--graph", gpath, "--count", "6", "--seed", "4",
                "--out", upath).returncode == 0
    r = _cli("run", "--graph", gpath, "--updates", upath, "--algo", "engine",
             "--k", "2", "--l", "2", "--T", "2", "--eval-runs", "300",
             "--eval-stride", "3", "--seed", "5", "--out", tpath,
             "--summary", spath)
    assert r.returncode == 0, r.stderr
    import json

    summary = json.loads((tmp_path / "s.json").read_text())
    assert {"algo", "final_min_spread", "union_size", "restarts", "total_ns"} <= set(summary)
    seeds_file = tmp_path / "seeds.txt"
    seeds_file.write_text(" ".join(str(s) for s in summary["seeds"]) + "\n")
    r = _cli("eval", "--graph", gpath, "--seeds", str(seeds_file), "--l", "2",
             "--eval-runs", "300", "--seed", "5")
    assert r.returncode == 0, r.stderr
    assert "min_spread" in r.stdout

    gamma_csv = str(tmp_path / "gamma.csv")
    r = _cli("gamma", "--graph", gpath, "--updates", upath, "--k", "2", "--l", "2",
             "--T", "2", "--seed", "5", "--out", gamma_csv)
    assert r.returncode == 0, r.stderr
    assert open(gamma_csv).readline().startswith("step,event,")


def test_cli_error_exit_codes(tmp_path):
    r = _cli("run", "--graph", str(tmp_path / "missing.txt"))
    assert r.returncode == 2
    assert "error:" in r.stderr
    gpath = str(tmp_path / "g.txt")
    _cli("gen-graph", "--n0", "4", "--m0", "4", "--seed", "1", "--out", gpath)
    r = _cli("run", "--graph", gpath, "--k", "0")  # invalid config
    assert r.returncode == 2
