"""Personalized damping-model rank engine.

Thin wrapper over the compiled core. Build a Graph, derive a Basis once,
then evaluate any damping family against it.
"""

from ._core import (
    Basis,
    Graph,
    build_basis,
    correspondence_solve,
    cycle_graph,
    gauss_seidel_rank,
    graph_hash,
    kl_divergence,
    load_basis,
    load_graph,
    mean_steps,
    random_graph,
    rank,
    rank_derivative,
    scc_block_sizes,
    tail_mass,
    weight,
)

__all__ = [
    "Basis",
    "Graph",
    "build_basis",
    "correspondence_solve",
    "cycle_graph",
    "gauss_seidel_rank",
    "graph_hash",
    "kl_divergence",
    "load_basis",
    "load_graph",
    "mean_steps",
    "random_graph",
    "rank",
    "rank_derivative",
    "scc_block_sizes",
    "tail_mass",
    "weight",
]

__version__ = "1.0.0"
