"""seedstream: robust seed-set maintenance on evolving diffusion networks."""

from .engine import Engine, EngineConfig, RunStats, compute_delta_and_R
from .graphs import (
    DynGraph,
    InsertEdge,
    InsertNode,
    RemoveEdge,
    RemoveNode,
    apply_update,
    load_graph,
    load_stream,
    save_graph,
    save_stream,
)
from .probmodels import (
    HyperparamModel,
    HyperparamSpace,
    edge_feature,
    edge_probability,
    prob_bounds,
    sample_hyperparameters,
)
from .seeding import SeedSolution, gamma_of_trace

__all__ = [
    "DynGraph", "Engine", "EngineConfig", "HyperparamModel", "HyperparamSpace",
    "InsertEdge", "InsertNode", "RemoveEdge", "RemoveNode", "RunStats",
    "SeedSolution", "apply_update", "compute_delta_and_R", "edge_feature",
    "edge_probability", "gamma_of_trace", "load_graph", "load_stream",
    "prob_bounds", "sample_hyperparameters", "save_graph", "save_stream",
]
