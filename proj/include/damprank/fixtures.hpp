#pragma once

#include <cstdint>

#include "damprank/edge_graph.hpp"

namespace damprank {

/// Seeded random digraph: out-degrees ~ Poisson(mean_out_degree), targets
/// uniform without repeats (self-loops allowed). Nodes drawing degree 0 are
/// dangling. Deterministic in (n, mean_out_degree, seed).
EdgeGraph random_graph(std::size_t n, double mean_out_degree, std::uint64_t seed);

/// Chain of cliques: `blocks` cliques of the given size, consecutive cliques
/// linked i -> i+1 by `bridges` random edges, so the SCC condensation is a
/// path. Deterministic in all arguments.
EdgeGraph dag_of_cliques(std::size_t blocks, std::size_t clique_size,
                         std::size_t bridges, std::uint64_t seed);

/// Directed n-cycle 0 -> 1 -> ... -> n-1 -> 0.
EdgeGraph cycle_graph(std::size_t n);

/// Directed chain 0 -> 1 -> ... -> n-1 (last node dangling).
EdgeGraph chain_graph(std::size_t n);

} // namespace damprank
