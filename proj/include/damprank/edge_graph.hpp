#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace damprank {

enum class EdgeFormat { tsv, konect };

/// Directed graph as a plain edge list with dense 0-based node ids.
/// Duplicate edges and self-loops are kept as parsed; deduplication happens
/// when the stochastic operator is built.
struct EdgeGraph {
    std::size_t n = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges; // (src, dst)
    std::vector<std::string> labels;  // arbitrary original labels, or empty
    std::uint64_t label_base = 0;     // 0 or 1, offset of the numeric input ids
    bool declared_symmetric = false;  // from a KONECT header, informational only

    std::size_t edge_count() const { return edges.size(); }

    /// Original identifier of internal node id i.
    std::string label(std::size_t i) const {
        if (!labels.empty()) return labels[i];
        return std::to_string(i + label_base);
    }
};

/// Parse a whitespace-separated edge list. Lines starting with '#' or '%' are
/// comments. Numeric inputs are detected as 0-based or 1-based by the minimum
/// id seen; ids missing from the range become isolated nodes. Non-numeric
/// tokens switch the file to label mode, mapping labels in order of first
/// appearance. In konect format the header comment's sym/asym flag is kept
/// (counts are ignored) and extra trailing columns (weights, timestamps) are
/// tolerated; in tsv format extra columns are an error.
EdgeGraph parse_edge_list(const std::filesystem::path& path, EdgeFormat format);

/// FNV-1a over n and the edge list; identifies a graph across runs.
std::uint64_t graph_hash(const EdgeGraph& g);

} // namespace damprank
