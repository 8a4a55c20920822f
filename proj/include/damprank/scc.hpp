#pragma once

#include <cstdint>
#include <vector>

#include "damprank/edge_graph.hpp"

namespace damprank {

/// Node permutation with block boundaries. Blocks are strongly connected
/// components emitted in reverse topological order of the condensation:
/// block 0 is a sink, the last block a source, and every edge (src, dst)
/// satisfies block_of(dst) <= block_of(src). Under the permutation the
/// adjacency matrix is block upper triangular.
struct BlockOrdering {
    std::vector<std::uint32_t> perm;        // position -> original node id
    std::vector<std::size_t> block_starts;  // size block_count()+1, ends with n
    std::vector<std::uint32_t> block_id;    // original node id -> block
    std::vector<std::uint32_t> position;    // original node id -> position
    std::size_t lscc_index = 0;             // index of the largest block
    std::uint64_t source_graph_hash = 0;

    std::size_t block_count() const { return block_starts.size() - 1; }
    std::size_t block_size(std::size_t b) const {
        return block_starts[b + 1] - block_starts[b];
    }
    std::vector<std::size_t> block_sizes() const;
};

/// Iterative Tarjan SCC; total function over any directed graph.
BlockOrdering scc_blocks(const EdgeGraph& g);

} // namespace damprank
