#include "damprank/fixtures.hpp"

#include "damprank/prng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace damprank {

namespace {

// Knuth's product-of-uniforms sampler; fine for the small means used here.
std::size_t poisson_draw(double mean, std::uint64_t seed, std::uint64_t& ctr) {
    const double limit = std::exp(-mean);
    double prod = 1.0;
    std::size_t k = 0;
    do {
        prod *= uniform01(seed, ctr++);
        ++k;
    } while (prod > limit);
    return k - 1;
}

std::uint32_t uniform_below(std::size_t n, std::uint64_t seed, std::uint64_t& ctr) {
    auto t = static_cast<std::size_t>(uniform01(seed, ctr++) * static_cast<double>(n));
    return static_cast<std::uint32_t>(std::min(t, n - 1));
}

} // namespace

EdgeGraph random_graph(std::size_t n, double mean_out_degree, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("random_graph: n must be positive");
    if (!(mean_out_degree >= 0.0) || !std::isfinite(mean_out_degree))
        throw std::invalid_argument("random_graph: mean_out_degree must be finite and >= 0");

    EdgeGraph g;
    g.n = n;
    std::uint64_t ctr = 0;
    std::vector<std::uint32_t> targets;
    for (std::size_t u = 0; u < n; ++u) {
        std::size_t deg = std::min(poisson_draw(mean_out_degree, seed, ctr), n);
        targets.clear();
        while (targets.size() < deg) {
            std::uint32_t t = uniform_below(n, seed, ctr);
            if (std::find(targets.begin(), targets.end(), t) == targets.end())
                targets.push_back(t);
        }
        for (std::uint32_t t : targets)
            g.edges.emplace_back(static_cast<std::uint32_t>(u), t);
    }
    return g;
}

EdgeGraph dag_of_cliques(std::size_t blocks, std::size_t clique_size,
                         std::size_t bridges, std::uint64_t seed) {
    if (blocks == 0 || clique_size == 0)
        throw std::invalid_argument("dag_of_cliques: blocks and clique_size must be positive");
    if (bridges > clique_size * clique_size)
        throw std::invalid_argument("dag_of_cliques: more bridges than distinct pairs");

    EdgeGraph g;
    g.n = blocks * clique_size;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t base = b * clique_size;
        for (std::size_t i = 0; i < clique_size; ++i)
            for (std::size_t j = 0; j < clique_size; ++j)
                if (i != j)
                    g.edges.emplace_back(static_cast<std::uint32_t>(base + i),
                                         static_cast<std::uint32_t>(base + j));
    }
    std::uint64_t ctr = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> picked;
    for (std::size_t b = 0; b + 1 < blocks; ++b) {
        const std::size_t src_base = b * clique_size;
        const std::size_t dst_base = (b + 1) * clique_size;
        picked.clear();
        while (picked.size() < bridges) {
            std::uint32_t s = uniform_below(clique_size, seed, ctr);
            std::uint32_t d = uniform_below(clique_size, seed, ctr);
            if (std::find(picked.begin(), picked.end(), std::make_pair(s, d)) == picked.end())
                picked.emplace_back(s, d);
        }
        for (auto [s, d] : picked)
            g.edges.emplace_back(static_cast<std::uint32_t>(src_base + s),
                                 static_cast<std::uint32_t>(dst_base + d));
    }
    return g;
}

EdgeGraph cycle_graph(std::size_t n) {
    if (n == 0) throw std::invalid_argument("cycle_graph: n must be positive");
    EdgeGraph g;
    g.n = n;
    for (std::size_t i = 0; i < n; ++i)
        g.edges.emplace_back(static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>((i + 1) % n));
    return g;
}

EdgeGraph chain_graph(std::size_t n) {
    if (n == 0) throw std::invalid_argument("chain_graph: n must be positive");
    EdgeGraph g;
    g.n = n;
    for (std::size_t i = 0; i + 1 < n; ++i)
        g.edges.emplace_back(static_cast<std::uint32_t>(i),
                             static_cast<std::uint32_t>(i + 1));
    return g;
}

} // namespace damprank
