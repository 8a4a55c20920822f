#include "damprank/edge_graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "damprank/errors.hpp"

namespace damprank {

namespace {

bool parse_u64(std::string_view tok, std::uint64_t& out) {
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) toks.push_back(line.substr(start, i - start));
    }
    return toks;
}

} // namespace

EdgeGraph parse_edge_list(const std::filesystem::path& path, EdgeFormat format) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open edge list: " + path.string());

    EdgeGraph g;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> numeric_edges;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> label_edges;
    std::unordered_map<std::string, std::uint32_t> label_ids;
    bool label_mode = false;
    bool saw_header = false;

    auto label_id = [&](std::string_view tok) -> std::uint32_t {
        auto [it, inserted] = label_ids.try_emplace(std::string(tok),
                                                    static_cast<std::uint32_t>(label_ids.size()));
        if (inserted && label_ids.size() > std::numeric_limits<std::uint32_t>::max())
            throw data_error("too many distinct node labels");
        return it->second;
    };

    // A non-numeric token switches the whole parse to label mode; previously
    // seen numeric ids keep their decimal spelling as label, in edge order.
    // ids are assigned in first-appearance order, so the two lookups per edge
    // must be sequenced
    auto label_edge = [&](std::string_view s, std::string_view d) {
        const std::uint32_t si = label_id(s);
        const std::uint32_t di = label_id(d);
        label_edges.emplace_back(si, di);
    };

    auto switch_to_labels = [&]() {
        label_mode = true;
        label_edges.reserve(numeric_edges.size());
        for (const auto& [s, d] : numeric_edges)
            label_edge(std::to_string(s), std::to_string(d));
        numeric_edges.clear();
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks[0][0] == '%' || toks[0][0] == '#') {
            // konect header `% sym|asym ...`: only the direction flag matters
            if (format == EdgeFormat::konect && !saw_header && toks[0][0] == '%') {
                auto head = toks;
                if (head[0] == "%")
                    head.erase(head.begin());
                else
                    head[0] = head[0].substr(1);
                if (!head.empty() && (head[0] == "sym" || head[0] == "asym" || head[0] == "bip")) {
                    saw_header = true;
                    g.declared_symmetric = (head[0] == "sym");
                }
            }
            continue;
        }
        if (toks.size() < 2) {
            throw data_error(path.string() + ":" + std::to_string(line_no) +
                             ": malformed line (need `src dst`)");
        }
        if (toks.size() > 2 && format == EdgeFormat::tsv) {
            throw data_error(path.string() + ":" + std::to_string(line_no) +
                             ": expected 2 tokens, got " + std::to_string(toks.size()));
        }
        if (!label_mode) {
            std::uint64_t s = 0, d = 0;
            if (parse_u64(toks[0], s) && parse_u64(toks[1], d)) {
                numeric_edges.emplace_back(s, d);
                continue;
            }
            switch_to_labels();
        }
        label_edge(toks[0], toks[1]);
    }
    if (in.bad()) throw data_error("i/o error reading " + path.string());

    if (label_mode) {
        g.n = label_ids.size();
        g.labels.resize(g.n);
        for (auto& [text, id] : label_ids) g.labels[id] = text;
        g.edges = std::move(label_edges);
        return g;
    }
    if (numeric_edges.empty()) return g;

    // 0- or 1-based numeric ids, decided by the minimum; gaps in the range
    // become isolated (dangling) nodes.
    std::uint64_t min_id = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t max_id = 0;
    for (const auto& [s, d] : numeric_edges) {
        min_id = std::min({min_id, s, d});
        max_id = std::max({max_id, s, d});
    }
    const std::uint64_t base = min_id == 0 ? 0 : 1;
    const std::uint64_t count = max_id - base + 1;
    if (count > std::numeric_limits<std::uint32_t>::max())
        throw data_error("node id range exceeds 32-bit id space");
    g.n = count;
    g.label_base = base;
    g.edges.reserve(numeric_edges.size());
    for (const auto& [s, d] : numeric_edges)
        g.edges.emplace_back(static_cast<std::uint32_t>(s - base),
                             static_cast<std::uint32_t>(d - base));
    return g;
}

std::uint64_t graph_hash(const EdgeGraph& g) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(g.n);
    for (const auto& [s, d] : g.edges) {
        mix(s);
        mix(d);
    }
    return h;
}

} // namespace damprank
