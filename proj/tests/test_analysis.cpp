#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "damprank/analysis.hpp"
#include "damprank/fixtures.hpp"
#include "damprank/solvers.hpp"
#include "test_support.hpp"

using namespace damprank;

namespace {

KrylovBasis patched_basis(std::size_t n, double deg, std::uint64_t seed,
                          PersonalizationVector* v_out = nullptr,
                          ColumnStochastic* p_out = nullptr) {
    auto g = random_graph(n, deg, seed);
    auto v = gen_personalization(g.n, seed + 1, PersonalizationMode::nonnegative);
    auto P = ColumnStochastic::build(g, DanglingMode::patch_v, &v);
    if (v_out) *v_out = v;
    if (p_out) *p_out = P;
    return arnoldi_build(P, v);
}

} // namespace

TEST_CASE("divergence of hand-computed distributions") {
    std::vector<double> u = {0.5, 0.5};
    CHECK(kl_divergence(u, u) == 0.0);

    std::vector<double> w = {0.25, 0.75};
    CHECK(kl_divergence(u, w) ==
          doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-15));

    // a zero may appear on the left (0 ln 0 = 0) but not face mass on the right
    std::vector<double> left_zero = {1.0, 0.0};
    CHECK(kl_divergence(left_zero, u) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(std::isinf(kl_divergence(u, left_zero)));

    std::vector<double> off_mass = {0.5, 0.4};
    std::vector<double> negative = {1.5, -0.5};
    std::vector<double> longer = {0.5, 0.5, 0.0};
    std::vector<double> with_nan = {std::numeric_limits<double>::quiet_NaN(), 1.0};
    CHECK_THROWS_AS(kl_divergence(u, off_mass), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence(negative, u), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence(longer, u), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence(with_nan, u), std::invalid_argument);
}

TEST_CASE("divergence is nonnegative on random distribution pairs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto a = gen_personalization(40, seed, PersonalizationMode::nonnegative);
        auto b = gen_personalization(40, seed + 100, PersonalizationMode::nonnegative);
        CHECK(kl_divergence(a.v, b.v) >= 0.0);
        CHECK(kl_divergence(a.v, a.v) == 0.0);
    }
}

TEST_CASE("analytic divergence slope matches a direct perturbation") {
    auto x = gen_personalization(30, 5, PersonalizationMode::nonnegative);
    auto x_o = gen_personalization(30, 6, PersonalizationMode::nonnegative);
    // a mass-preserving direction
    std::vector<double> dir(30, 0.0);
    for (std::size_t i = 0; i < 15; ++i) {
        dir[i] = x.v[i] * 0.1;
        dir[i + 15] = -x.v[i] * 0.1;
    }
    double total = ts::sum(dir);
    dir[0] -= total; // exact zero sum

    const double h = 1e-7;
    std::vector<double> xp = x.v, xm = x.v;
    for (std::size_t i = 0; i < 30; ++i) {
        xp[i] += h * dir[i];
        xm[i] -= h * dir[i];
    }
    const double fd = (kl_divergence(xp, x_o.v) - kl_divergence(xm, x_o.v)) / (2 * h);
    const double an = kl_derivative_analytic(dir, x.v, x_o.v);
    CHECK(std::abs(fd - an) < 1e-6 * (1.0 + std::abs(an)));
}

TEST_CASE("divergence sweep against dense recomputation") {
    PersonalizationVector v;
    ColumnStochastic P(ColumnStochastic::build(cycle_graph(2), DanglingMode::error));
    auto b = patched_basis(120, 6.0, 17, &v, &P);
    auto M = ts::dense_operator(P);
    auto kernel = DampingKernel::geometric();
    const double rho_o = 0.85;
    std::vector<double> grid = {0.5, 0.7, 0.85, 0.9, 0.95};

    auto sweep = kl_sweep(b, kernel, grid, rho_o);
    REQUIRE(sweep.records.size() == grid.size());
    CHECK(sweep.kernel_id == "geometric");
    CHECK(sweep.rho_o == rho_o);
    REQUIRE(sweep.fd_steps == std::vector<double>{0.002, 0.008});

    auto x_o = ts::dense_series(M, v.v, kernel, rho_o, 1e-16);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& rec = sweep.records[i];
        CHECK(rec.rho == grid[i]);
        CHECK(rec.kl >= -1e-12);
        REQUIRE(rec.dkl_empirical.size() == 2);

        auto x = ts::dense_series(M, v.v, kernel, grid[i], 1e-16);
        CHECK(std::abs(rec.kl - kl_divergence(x, x_o)) < 1e-8);

        // the reference point is an exact zero and a stationary point
        if (grid[i] == rho_o) {
            CHECK(rec.kl == 0.0);
            CHECK(std::abs(rec.dkl_analytic) < 1e-8);
        }
        // central differences of the curve confirm the analytic slope
        CHECK(std::abs(rec.dkl_analytic - rec.dkl_empirical[0]) <
              1e-3 * (1.0 + std::abs(rec.dkl_analytic)));
    }
}

TEST_CASE("divergence sweep is invariant under threading") {
    auto b = patched_basis(100, 5.0, 23);
    std::vector<double> grid = {0.3, 0.5, 0.6, 0.8, 0.9, 0.93};
    auto s1 = kl_sweep(b, DampingKernel::geometric(), grid, 0.6, {0.002, 0.008}, 1e-12, 1);
    auto s3 = kl_sweep(b, DampingKernel::geometric(), grid, 0.6, {0.002, 0.008}, 1e-12, 3);
    REQUIRE(s1.records.size() == s3.records.size());
    for (std::size_t i = 0; i < s1.records.size(); ++i) {
        CHECK(s1.records[i].kl == s3.records[i].kl);
        CHECK(s1.records[i].dkl_analytic == s3.records[i].dkl_analytic);
        CHECK(s1.records[i].dkl_empirical == s3.records[i].dkl_empirical);
    }
}

TEST_CASE("divergence sweep works for every family") {
    auto b = patched_basis(80, 5.0, 29);
    struct Probe {
        DampingKernel kernel;
        std::vector<double> grid;
        double rho_o;
    };
    std::vector<Probe> probes = {
        {DampingKernel::poisson(), {2.0, 4.0, 6.0}, 4.0},
        {DampingKernel::logarithmic(), {0.4, 0.6, 0.8}, 0.6},
        {DampingKernel::cmp(1.5), {2.0, 5.0}, 2.0},
    };
    for (const auto& p : probes) {
        CAPTURE(p.kernel.name());
        auto s = kl_sweep(b, p.kernel, p.grid, p.rho_o);
        for (const auto& rec : s.records) {
            CHECK(rec.kl >= -1e-12);
            CHECK(std::abs(rec.dkl_analytic - rec.dkl_empirical[0]) <
                  2e-3 * (1.0 + std::abs(rec.dkl_analytic)));
        }
    }
}

TEST_CASE("divergence sweep input validation") {
    auto b = patched_basis(40, 5.0, 31);
    auto geo = DampingKernel::geometric();
    CHECK_THROWS_AS(kl_sweep(b, geo, {}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(kl_sweep(b, geo, {0.5}, 1.5), std::domain_error);
    CHECK_THROWS_AS(kl_sweep(b, geo, {0.5, 2.0}, 0.5), std::domain_error);
    CHECK_THROWS_AS(kl_sweep(b, geo, {0.5}, 0.5, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(kl_sweep(b, geo, {0.5}, 0.5, {0.002}, 1e-12, 0), std::invalid_argument);

    // signed customization vectors are not distributions
    auto g = random_graph(40, 5.0, 32);
    auto vs = gen_personalization(40, 1, PersonalizationMode::signed_sum);
    auto Ps = ColumnStochastic::build(g, DanglingMode::uniform);
    auto bs = arnoldi_build(Ps, vs);
    CHECK_THROWS_AS(kl_sweep(bs, geo, {0.5}, 0.5), std::invalid_argument);
}

// ================================================================ histogram

TEST_CASE("histogram bin placement on hand-sized examples") {
    SUBCASE("uniform mass lands on the scale point 1") {
        std::vector<double> x = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        auto h = histogram(x, {0.0, 1.0, 2.0});
        CHECK(h.counts == std::vector<std::uint64_t>{0, 3});
        CHECK(h.underflow == 0);
        CHECK(h.overflow == 0);
    }
    SUBCASE("skewed three-node ranks") {
        std::vector<double> x = {4.0 / 7, 2.0 / 7, 1.0 / 7};
        auto h = histogram(x, {0.0, 1.0, 2.0});
        CHECK(h.counts == std::vector<std::uint64_t>{2, 1});
        CHECK(h.overflow == 0);
    }
    SUBCASE("under- and overflow are counted") {
        std::vector<double> x = {4.0 / 7, 2.0 / 7, 1.0 / 7}; // scaled: 12/7, 6/7, 3/7
        auto h = histogram(x, {0.5, 1.0});
        CHECK(h.counts == std::vector<std::uint64_t>{1}); // 6/7
        CHECK(h.underflow == 1);                          // 3/7
        CHECK(h.overflow == 1);                           // 12/7
    }
    SUBCASE("left-closed right-open convention") {
        std::vector<double> x = {0.25, 0.25, 0.25, 0.25}; // scaled: all exactly 1
        auto h = histogram(x, {0.0, 1.0, 2.0});
        CHECK(h.counts == std::vector<std::uint64_t>{0, 4});
        auto h2 = histogram(x, {0.0, 1.0});
        CHECK(h2.counts == std::vector<std::uint64_t>{0});
        CHECK(h2.overflow == 4); // 1 is outside [0, 1)
    }
}

TEST_CASE("histogram counts always partition the nodes") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto x = gen_personalization(500, seed, PersonalizationMode::nonnegative);
        auto edges = default_histogram_edges(x.v, 50);
        REQUIRE(edges.size() == 51);
        CHECK(edges.front() == 0.0);
        for (std::size_t i = 1; i < edges.size(); ++i) CHECK(edges[i] > edges[i - 1]);

        auto h = histogram(x.v, edges);
        std::uint64_t total = h.underflow + h.overflow;
        for (auto c : h.counts) total += c;
        CHECK(total == 500);
        CHECK(h.underflow == 0);
        CHECK(h.overflow <= 1 + 500 / 500); // the top 0.1 percent at most, plus ties
    }
}

TEST_CASE("histogram input validation") {
    std::vector<double> x = {0.5, 0.5};
    CHECK_THROWS_AS(histogram(x, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(histogram(x, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(histogram(x, {2.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(default_histogram_edges(std::vector<double>{}, 10), std::invalid_argument);
    CHECK_THROWS_AS(default_histogram_edges(x, 0), std::invalid_argument);
}

// ================================================================ correspondence

TEST_CASE("families aligned at a common expected walk length") {
    PersonalizationVector v;
    ColumnStochastic P(ColumnStochastic::build(cycle_graph(2), DanglingMode::error));
    auto b = patched_basis(150, 6.0, 37, &v, &P);

    const double alpha = 0.85;
    std::vector<DampingKernel> fams = {DampingKernel::geometric(), DampingKernel::poisson(),
                                       DampingKernel::logarithmic(), DampingKernel::cmp(1.5)};
    auto cmp = correspondence_compare(b, alpha, fams);

    const double target = alpha / (1.0 - alpha);
    CHECK(cmp.reference_alpha == alpha);
    CHECK(cmp.target_mean == doctest::Approx(target).epsilon(1e-15));
    REQUIRE(cmp.families.size() == 4);
    REQUIRE(cmp.pairwise_kl.size() == 4);

    for (std::size_t i = 0; i < 4; ++i) {
        const auto& f = cmp.families[i];
        CHECK(f.family.rfind(fams[i].name(), 0) == 0); // id starts with the family name
        CHECK(std::abs(f.mean - target) <= 1e-9 * (1.0 + target));
        CHECK(std::abs(fams[i].mean_steps(f.rho_star) - target) <= 1e-9 * (1.0 + target));
        CHECK(std::abs(ts::sum(f.x) - 1.0) < 1e-10);
        CHECK(f.hist.bin_edges == cmp.families[0].hist.bin_edges); // shared axes

        REQUIRE(cmp.pairwise_kl[i].size() == 4);
        CHECK(cmp.pairwise_kl[i][i] == 0.0);
        for (std::size_t j = 0; j < 4; ++j) CHECK(cmp.pairwise_kl[i][j] >= 0.0);
    }

    // the geometric family is its own reference; the poisson match is exact;
    // the shape parameter is part of the reported id
    CHECK(cmp.families[0].rho_star == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(cmp.families[1].rho_star == doctest::Approx(target).epsilon(1e-14));
    CHECK(cmp.families[3].family == "cmp-nu1.5");

    // distinct shapes at the same mean still rank differently
    bool some_gap = false;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (i != j && cmp.pairwise_kl[i][j] > 1e-8) some_gap = true;
    CHECK(some_gap);
}

TEST_CASE("on the stationary vector all families coincide") {
    auto g = cycle_graph(8);
    auto v = personalization_from_values(std::vector<double>(8, 0.125),
                                         PersonalizationMode::nonnegative);
    auto P = ColumnStochastic::build(g, DanglingMode::error);
    auto b = arnoldi_build(P, v);

    auto cmp = correspondence_compare(
        b, 0.85, {DampingKernel::geometric(), DampingKernel::poisson(),
                  DampingKernel::logarithmic()});
    for (const auto& row : cmp.pairwise_kl)
        for (double kl : row) CHECK(kl <= 1e-10);
    for (const auto& f : cmp.families)
        CHECK(ts::max_abs_diff(f.x, v.v) < 1e-10);
}

TEST_CASE("correspondence input validation") {
    auto b = patched_basis(30, 5.0, 41);
    CHECK_THROWS_AS(correspondence_compare(b, 1.0, {DampingKernel::geometric()}),
                    std::domain_error);
    CHECK_THROWS_AS(correspondence_compare(b, 0.85, {}), std::invalid_argument);
}
