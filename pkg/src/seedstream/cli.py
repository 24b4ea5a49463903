"""Command-line interface: generate instances, replay update streams, and
evaluate seed sets.

Subcommands: gen-graph, gen-updates, run, eval, gamma.  All randomness is
governed by --seed; precondition or configuration errors exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, graphs
from .engine import ConfigError, Engine, EngineConfig, ModeError, config_from_file
from .graphs import GraphUpdateError
from .oracles import min_spread
from .probmodels import sample_hyperparameters


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with engine parameters")
    p.add_argument("--k", type=int)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--delta1", type=float)
    p.add_argument("--delta2", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--model", dest="model_kind",
                   choices=["linear", "logistic", "probit"])
    p.add_argument("--l", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--mode", choices=["incremental", "fully_dynamic"])
    p.add_argument("--r-override", dest="R_override", type=float)
    p.add_argument("--theory-R", action="store_true",
                   help="use the analytical sampling budget instead of R_override")
    p.add_argument("--hiro-roots", type=int)
    p.add_argument("--center", help="space-separated center vector")


def _build_config(args, d: int) -> EngineConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("k", "eps1", "eps2", "delta1", "delta2", "B", "model_kind",
                  "l", "T", "mode", "R_override", "hiro_roots")}
    overrides["seed"] = args.seed
    overrides["d"] = d
    if getattr(args, "center", None):
        overrides["center"] = np.array([float(x) for x in args.center.split()])
    if args.config:
        cfg = config_from_file(args.config, **overrides)
    else:
        cfg = EngineConfig(**{k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "theory_R", False):
        cfg.R_override = None
    return cfg


def cmd_gen_graph(args) -> int:
    rng = np.random.default_rng(args.seed)
    g = bench.gen_synthetic(args.n0, args.m0, args.feat_dim, rng)
    graphs.save_graph(g, args.out)
    print(f"wrote {args.out}: n={g.n} m={g.m} d={g.edge_dim}")
    return 0


def cmd_gen_updates(args) -> int:
    g = graphs.load_graph(args.graph)
    count = args.count if args.count is not None else 2 * g.m
    weights = None
    if args.mix:
        vals = [float(x) for x in args.mix.split(",")]
        if len(vals) != 4:
            raise ValueError("--mix wants four comma-separated weights (+n,+e,-n,-e)")
        weights = dict(zip(["+n", "+e", "-n", "-e"], vals))
    spec = bench.StreamSpec(count, args.setting, weights)
    stream = bench.gen_stream(g, spec, np.random.default_rng(args.seed))
    graphs.save_stream(stream, args.out)
    print(f"wrote {args.out}: {len(stream)} updates ({args.setting})")
    return 0


def cmd_run(args) -> int:
    g = graphs.load_graph(args.graph)
    stream = graphs.load_stream(args.updates) if args.updates else []
    cfg = _build_config(args, g.edge_dim)
    result = bench.run_experiment(g, stream, cfg, args.algo,
                                  eval_runs=args.eval_runs,
                                  eval_stride=args.eval_stride)
    if args.out:
        bench.write_trace_csv(result.rows, args.out)
    summary = {
        "algo": result.algo,
        "updates": len(stream),
        "final_min_spread": result.final_min_spread,
        "union_size": len(result.final_seeds),
        "restarts": result.restarts,
        "total_ns": result.total_ns,
        "seeds": list(result.final_seeds),
    }
    text = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_eval(args) -> int:
    g = graphs.load_graph(args.graph)
    cfg = _build_config(args, g.edge_dim)
    with open(args.seeds) as fh:
        seeds = [int(tok) for tok in fh.read().split()]
    thetas = sample_hyperparameters(
        cfg.space, cfg.l, np.random.default_rng(np.random.SeedSequence([cfg.seed, 7])))
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 404]))
    value = min_spread(g, thetas, cfg.model, seeds, args.eval_runs, rng)
    print(json.dumps({"min_spread": value, "seeds": len(seeds), "l": cfg.l}))
    return 0


def cmd_gamma(args) -> int:
    g = graphs.load_graph(args.graph)
    stream = graphs.load_stream(args.updates) if args.updates else []
    cfg = _build_config(args, g.edge_dim)
    eng = Engine(g, cfg, record_gamma_trace=True)
    for upd in stream:
        eng.process_update(upd)
    with open(args.out, "w") as fh:
        fh.write("step,event,gamma_max_form,gamma_sum_form\n")
        for step, event, gi, gf in eng.stats.gamma_trace:
            fh.write(f"{step},{event},{gi!r},{gf!r}\n")
    stats = eng.stats
    print(json.dumps({
        "events": stats.gamma_events,
        "gamma_incremental_max": stats.gamma_incremental_max,
        "gamma_fully_dynamic_max": stats.gamma_fully_dynamic_max,
        "restarts": stats.restarts,
    }))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seedstream")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate a synthetic graph file")
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--m0", type=int, required=True)
    p.add_argument("--feat-dim", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("gen-updates", help="generate an update stream file")
    p.add_argument("--graph", required=True)
    p.add_argument("--count", type=int, default=None, help="default 2*m0")
    p.add_argument("--setting", choices=["incremental", "fully_dynamic"],
                   default="incremental")
    p.add_argument("--mix", help="four comma-separated kind weights (+n,+e,-n,-e)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_updates)

    p = sub.add_parser("run", help="run an algorithm over an update stream")
    p.add_argument("--graph", required=True)
    p.add_argument("--updates")
    p.add_argument("--algo", choices=["engine", "base", "hiro", "lugreedy"],
                   default="engine")
    p.add_argument("--eval-runs", type=int, default=10_000)
    p.add_argument("--eval-stride", type=int, default=50)
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a seed set's worst-case spread")
    p.add_argument("--graph", required=True)
    p.add_argument("--seeds", required=True, help="file of whitespace-separated ids")
    p.add_argument("--eval-runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gamma", help="record the per-event gamma trace")
    p.add_argument("--graph", required=True)
    p.add_argument("--updates")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gamma)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModeError, GraphUpdateError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
