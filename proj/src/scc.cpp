#include "damprank/scc.hpp"

#include "damprank/edge_graph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace damprank {

std::vector<std::size_t> BlockOrdering::block_sizes() const {
    std::vector<std::size_t> sizes(block_count());
    for (std::size_t b = 0; b < sizes.size(); ++b) sizes[b] = block_size(b);
    return sizes;
}

BlockOrdering scc_blocks(const EdgeGraph& g) {
    constexpr std::uint32_t unset = std::numeric_limits<std::uint32_t>::max();
    if (g.n >= unset)
        throw std::invalid_argument("scc_blocks: node count exceeds 32-bit ids");
    const auto n = static_cast<std::uint32_t>(g.n);

    // Out-adjacency, duplicates kept (harmless for reachability).
    std::vector<std::size_t> adj_ptr(n + 1, 0);
    for (const auto& [s, d] : g.edges) {
        if (s >= n || d >= n)
            throw std::invalid_argument("scc_blocks: edge endpoint out of range");
        ++adj_ptr[s + 1];
    }
    std::partial_sum(adj_ptr.begin(), adj_ptr.end(), adj_ptr.begin());
    std::vector<std::uint32_t> adj(g.edges.size());
    {
        std::vector<std::size_t> cursor(adj_ptr.begin(), adj_ptr.end() - 1);
        for (const auto& [s, d] : g.edges) adj[cursor[s]++] = d;
    }

    BlockOrdering out;
    out.source_graph_hash = graph_hash(g);
    out.perm.reserve(n);
    out.block_starts.push_back(0);
    out.block_id.assign(n, unset);
    out.position.assign(n, unset);

    // Tarjan with an explicit frame stack; components complete in reverse
    // topological order of the condensation.
    std::vector<std::uint32_t> idx(n, unset), low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<std::uint32_t> stack;
    struct Frame {
        std::uint32_t v;
        std::size_t edge;
    };
    std::vector<Frame> frames;
    std::uint32_t counter = 0;
    std::uint32_t blocks = 0;

    for (std::uint32_t root = 0; root < n; ++root) {
        if (idx[root] != unset) continue;
        idx[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        frames.push_back({root, adj_ptr[root]});
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.edge < adj_ptr[f.v + 1]) {
                const std::uint32_t w = adj[f.edge++];
                if (idx[w] == unset) {
                    idx[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.push_back({w, adj_ptr[w]});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], idx[w]);
                }
            } else {
                const std::uint32_t v = f.v;
                frames.pop_back();
                if (!frames.empty())
                    low[frames.back().v] = std::min(low[frames.back().v], low[v]);
                if (low[v] == idx[v]) {
                    const std::size_t first = out.perm.size();
                    std::uint32_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        out.block_id[w] = blocks;
                        out.perm.push_back(w);
                    } while (w != v);
                    std::sort(out.perm.begin() + static_cast<std::ptrdiff_t>(first),
                              out.perm.end());
                    out.block_starts.push_back(out.perm.size());
                    ++blocks;
                }
            }
        }
    }

    for (std::size_t p = 0; p < out.perm.size(); ++p) out.position[out.perm[p]] = static_cast<std::uint32_t>(p);
    for (std::size_t b = 0; b < out.block_count(); ++b)
        if (out.block_size(b) > out.block_size(out.lscc_index)) out.lscc_index = b;
    return out;
}

} // namespace damprank
