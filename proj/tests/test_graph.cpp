#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "damprank/column_stochastic.hpp"
#include "damprank/edge_graph.hpp"
#include "damprank/errors.hpp"
#include "damprank/fixtures.hpp"
#include "damprank/personalization.hpp"
#include "damprank/prng.hpp"
#include "damprank/scc.hpp"
#include "test_support.hpp"

using namespace damprank;

// ================================================================ parsing

TEST_CASE("numeric edge lists map by base offset") {
    ts::TempDir td("parse");

    SUBCASE("zero-based") {
        auto p = ts::write_file(td.file("g.tsv"), "0 1\n1 2\n");
        auto g = parse_edge_list(p, EdgeFormat::tsv);
        CHECK(g.n == 3);
        CHECK(g.label_base == 0);
        CHECK(g.edges == decltype(g.edges){{0, 1}, {1, 2}});
        CHECK(g.label(0) == "0");
        CHECK(g.label(2) == "2");
    }
    SUBCASE("one-based") {
        auto p = ts::write_file(td.file("g.tsv"), "1 2\n2 3\n");
        auto g = parse_edge_list(p, EdgeFormat::tsv);
        CHECK(g.n == 3);
        CHECK(g.label_base == 1);
        CHECK(g.edges == decltype(g.edges){{0, 1}, {1, 2}});
        CHECK(g.label(0) == "1");
        CHECK(g.label(2) == "3");
    }
    SUBCASE("gaps become isolated nodes") {
        auto p = ts::write_file(td.file("g.tsv"), "1 5\n");
        auto g = parse_edge_list(p, EdgeFormat::tsv);
        CHECK(g.n == 5);
        CHECK(g.edges == decltype(g.edges){{0, 4}});
    }
    SUBCASE("min id 2 still means one-based") {
        auto p = ts::write_file(td.file("g.tsv"), "2 3\n");
        auto g = parse_edge_list(p, EdgeFormat::tsv);
        CHECK(g.n == 3);
        CHECK(g.label_base == 1);
        CHECK(g.edges == decltype(g.edges){{1, 2}});
    }
}

TEST_CASE("label edge lists map by first appearance") {
    ts::TempDir td("labels");
    auto p = ts::write_file(td.file("g.tsv"), "alice bob\nbob carol\ncarol alice\n");
    auto g = parse_edge_list(p, EdgeFormat::tsv);
    CHECK(g.n == 3);
    CHECK(g.label(0) == "alice");
    CHECK(g.label(1) == "bob");
    CHECK(g.label(2) == "carol");
    CHECK(g.edges == decltype(g.edges){{0, 1}, {1, 2}, {2, 0}});
}

TEST_CASE("a late non-numeric token switches the whole file to labels") {
    ts::TempDir td("mixed");
    auto p = ts::write_file(td.file("g.tsv"), "7 8\nx 7\n");
    auto g = parse_edge_list(p, EdgeFormat::tsv);
    CHECK(g.n == 3);
    // previously seen numeric ids keep their decimal spelling
    CHECK(g.label(0) == "7");
    CHECK(g.label(1) == "8");
    CHECK(g.label(2) == "x");
    CHECK(g.edges == decltype(g.edges){{0, 1}, {2, 0}});
}

TEST_CASE("comments, blank lines and whitespace are skipped") {
    ts::TempDir td("comments");
    auto p = ts::write_file(td.file("g.tsv"),
                            "# header comment\n\n   \n% another\n  3\t4  \n");
    auto g = parse_edge_list(p, EdgeFormat::tsv);
    CHECK(g.n == 4);
    CHECK(g.edge_count() == 1);
}

TEST_CASE("konect header sets only the direction flag") {
    ts::TempDir td("konect");

    SUBCASE("asym with counts that disagree with the data") {
        auto p = ts::write_file(td.file("g"), "% asym 999 777\n1 2\n2 1\n");
        auto g = parse_edge_list(p, EdgeFormat::konect);
        CHECK(g.n == 2); // declared counts are ignored
        CHECK_FALSE(g.declared_symmetric);
    }
    SUBCASE("sym, glued to the percent sign") {
        auto p = ts::write_file(td.file("g"), "%sym 4 4\n1 2\n");
        auto g = parse_edge_list(p, EdgeFormat::konect);
        CHECK(g.declared_symmetric);
    }
    SUBCASE("trailing weight and timestamp columns are tolerated") {
        auto p = ts::write_file(td.file("g"), "% asym\n1 2 1.5 1234567\n2 3 2.5 1234568\n");
        auto g = parse_edge_list(p, EdgeFormat::konect);
        CHECK(g.n == 3);
        CHECK(g.edge_count() == 2);
    }
}

TEST_CASE("tsv rejects extra columns, short lines, unreadable files") {
    ts::TempDir td("badparse");
    CHECK_THROWS_AS(
        parse_edge_list(ts::write_file(td.file("a"), "1 2 3\n"), EdgeFormat::tsv),
        data_error);
    CHECK_THROWS_AS(parse_edge_list(ts::write_file(td.file("b"), "1\n"), EdgeFormat::tsv),
                    data_error);
    CHECK_THROWS_AS(parse_edge_list(td.file("missing.tsv"), EdgeFormat::tsv), data_error);
}

TEST_CASE("empty input is an empty graph") {
    ts::TempDir td("empty");
    auto g = parse_edge_list(ts::write_file(td.file("g.tsv"), "# nothing\n"), EdgeFormat::tsv);
    CHECK(g.n == 0);
    CHECK(g.edge_count() == 0);
}

TEST_CASE("duplicate edges and self-loops survive parsing") {
    ts::TempDir td("dups");
    auto p = ts::write_file(td.file("g.tsv"), "0 1\n0 1\n1 1\n");
    auto g = parse_edge_list(p, EdgeFormat::tsv);
    CHECK(g.edge_count() == 3);
}

TEST_CASE("graph hash is structural") {
    ts::TempDir td("hash");
    auto a = parse_edge_list(ts::write_file(td.file("a"), "0 1\n1 2\n"), EdgeFormat::tsv);
    auto b = parse_edge_list(ts::write_file(td.file("b"), "1 2\n2 3\n"), EdgeFormat::tsv);
    auto c = parse_edge_list(ts::write_file(td.file("c"), "0 1\n1 2\n2 0\n"), EdgeFormat::tsv);
    CHECK(graph_hash(a) == graph_hash(b)); // same graph after base normalization
    CHECK(graph_hash(a) != graph_hash(c));
}

// ================================================================ operator

static PersonalizationVector uniform_v(std::size_t n) {
    return personalization_from_values(std::vector<double>(n, 1.0 / double(n)),
                                       PersonalizationMode::nonnegative);
}

TEST_CASE("column sums are exactly stochastic after patching") {
    auto g = random_graph(80, 4.0, 5);
    auto v = gen_personalization(g.n, 5, PersonalizationMode::nonnegative);

    for (auto mode : {DanglingMode::patch_v, DanglingMode::uniform}) {
        auto P = ColumnStochastic::build(g, mode, &v);
        CHECK(P.fully_stochastic());
        for (std::size_t j = 0; j < P.dimension(); ++j)
            CHECK(P.column_sum(j) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("dangling handling per mode") {
    ts::TempDir td("dangle");
    // node 2 has no out-edges
    auto g = parse_edge_list(ts::write_file(td.file("g"), "0 1\n1 2\n"), EdgeFormat::tsv);
    auto v = uniform_v(3);

    SUBCASE("error mode throws with a count") {
        try {
            ColumnStochastic::build(g, DanglingMode::error);
            FAIL("expected data_error");
        } catch (const data_error& e) {
            CHECK(std::string(e.what()).find("1") != std::string::npos);
        }
    }
    SUBCASE("leave mode keeps the zero column") {
        auto P = ColumnStochastic::build(g, DanglingMode::leave);
        CHECK_FALSE(P.fully_stochastic());
        CHECK(P.column_sum(2) == 0.0);
        CHECK(P.dangling_count() == 1);
    }
    SUBCASE("patch mode substitutes v") {
        auto P = ColumnStochastic::build(g, DanglingMode::patch_v, &v);
        std::vector<double> e2 = {0.0, 0.0, 1.0};
        auto y = P.multiply(e2);
        for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(v.v[i]));
    }
    SUBCASE("patch mode without v is a usage error") {
        CHECK_THROWS_AS(ColumnStochastic::build(g, DanglingMode::patch_v),
                        std::invalid_argument);
    }
}

TEST_CASE("duplicate edges collapse before degree normalization") {
    ts::TempDir td("dedup");
    auto g = parse_edge_list(ts::write_file(td.file("g"), "0 1\n0 1\n0 2\n2 0\n"),
                             EdgeFormat::tsv);
    auto P = ColumnStochastic::build(g, DanglingMode::uniform);
    // column 0 has two distinct targets, so each entry is 1/2
    std::vector<double> e0 = {1.0, 0.0, 0.0};
    auto y = P.multiply(e0);
    CHECK(y[1] == doctest::Approx(0.5));
    CHECK(y[2] == doctest::Approx(0.5));
}

TEST_CASE("multiply matches the dense operator on random graphs") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto g = random_graph(60, 5.0, seed);
        auto v = gen_personalization(g.n, seed + 100, PersonalizationMode::nonnegative);
        auto P = ColumnStochastic::build(g, DanglingMode::patch_v, &v);
        auto M = ts::dense_operator(P);

        std::vector<double> x(g.n);
        for (std::size_t i = 0; i < g.n; ++i) x[i] = uniform01(seed, i) - 0.3;
        auto y = P.multiply(x);
        Eigen::VectorXd yd = M * ts::to_eigen(x);
        CHECK(ts::max_abs_diff(y, ts::from_eigen(yd)) < 1e-14);
    }
}

TEST_CASE("multiply rejects aliased input and output") {
    auto g = cycle_graph(5);
    auto P = ColumnStochastic::build(g, DanglingMode::error);
    std::vector<double> x = {0.1, 0.2, 0.3, 0.2, 0.2};
    CHECK_THROWS_AS(P.multiply(x, x), std::invalid_argument);
}

TEST_CASE("row mirror transposes the link part exactly") {
    auto g = random_graph(50, 4.0, 9);
    auto P = ColumnStochastic::build(g, DanglingMode::leave);
    const auto& R = P.row_mirror();

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(50, 50);
    auto cp = P.col_ptr();
    for (std::size_t j = 0; j < 50; ++j)
        for (std::size_t k = cp[j]; k < cp[j + 1]; ++k)
            M(static_cast<Eigen::Index>(P.row_idx()[k]), static_cast<Eigen::Index>(j)) =
                P.values()[k];
    Eigen::MatrixXd Mr = Eigen::MatrixXd::Zero(50, 50);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t k = R.row_ptr[i]; k < R.row_ptr[i + 1]; ++k)
            Mr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(R.col_idx[k])) =
                R.values[k];
    CHECK((M - Mr).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(R.diag[i] == M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
}

// ================================================================ scc

static void check_ordering_valid(const EdgeGraph& g, const BlockOrdering& o) {
    const std::size_t n = g.n;
    REQUIRE(o.perm.size() == n);
    REQUIRE(o.block_starts.front() == 0);
    REQUIRE(o.block_starts.back() == n);
    // perm is a permutation and position is its inverse
    std::vector<bool> seen(n, false);
    for (std::size_t p = 0; p < n; ++p) {
        auto node = o.perm[p];
        REQUIRE(node < n);
        REQUIRE_FALSE(seen[node]);
        seen[node] = true;
        REQUIRE(o.position[node] == p);
    }
    // block_id agrees with the boundaries
    for (std::size_t b = 0; b < o.block_count(); ++b)
        for (std::size_t p = o.block_starts[b]; p < o.block_starts[b + 1]; ++p)
            REQUIRE(o.block_id[o.perm[p]] == b);
    // triangularity: every edge points into the same or an earlier block
    for (const auto& [s, d] : g.edges) REQUIRE(o.block_id[d] <= o.block_id[s]);
}

TEST_CASE("scc on hand fixtures") {
    SUBCASE("cycle is one block") {
        auto g = cycle_graph(7);
        auto o = scc_blocks(g);
        CHECK(o.block_count() == 1);
        CHECK(o.block_size(0) == 7);
        check_ordering_valid(g, o);
    }
    SUBCASE("chain is all singletons, sink first") {
        auto g = chain_graph(5);
        auto o = scc_blocks(g);
        CHECK(o.block_count() == 5);
        CHECK(o.perm[0] == 4); // the dangling end is the sink block
        CHECK(o.perm[4] == 0);
        check_ordering_valid(g, o);
    }
    SUBCASE("clique chain has one block per clique") {
        auto g = dag_of_cliques(4, 6, 2, 3);
        auto o = scc_blocks(g);
        CHECK(o.block_count() == 4);
        for (std::size_t b = 0; b < 4; ++b) CHECK(o.block_size(b) == 6);
        check_ordering_valid(g, o);
    }
    SUBCASE("empty graph") {
        EdgeGraph g;
        auto o = scc_blocks(g);
        CHECK(o.block_count() == 0);
    }
    SUBCASE("isolated nodes are singleton blocks") {
        ts::TempDir td("iso");
        auto g = parse_edge_list(ts::write_file(td.file("g"), "1 5\n"), EdgeFormat::tsv);
        auto o = scc_blocks(g);
        CHECK(o.block_count() == 5);
        check_ordering_valid(g, o);
    }
}

TEST_CASE("scc blocks equal brute-force mutual-reachability classes") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 2 + static_cast<std::size_t>(splitmix64(seed, 0) % 120);
        auto g = random_graph(n, 2.5, seed * 7 + 1);
        auto o = scc_blocks(g);
        auto cls = ts::brute_force_classes(g);
        check_ordering_valid(g, o);

        // same partition: block ids and class ids are in bijection
        std::map<int, std::uint32_t> fwd;
        std::map<std::uint32_t, int> bwd;
        for (std::size_t i = 0; i < n; ++i) {
            auto [fit, fnew] = fwd.try_emplace(cls[i], o.block_id[i]);
            REQUIRE(fit->second == o.block_id[i]);
            auto [bit, bnew] = bwd.try_emplace(o.block_id[i], cls[i]);
            REQUIRE(bit->second == cls[i]);
        }
    }
}

TEST_CASE("lscc_index points at the first largest block") {
    auto g = dag_of_cliques(3, 5, 1, 2);
    auto o = scc_blocks(g);
    CHECK(o.block_size(o.lscc_index) == 5);
    auto sizes = o.block_sizes();
    CHECK(*std::max_element(sizes.begin(), sizes.end()) == o.block_size(o.lscc_index));
}

// ================================================================ fixtures

TEST_CASE("fixture graphs are deterministic in their arguments") {
    auto a = random_graph(100, 8.0, 42);
    auto b = random_graph(100, 8.0, 42);
    auto c = random_graph(100, 8.0, 43);
    CHECK(graph_hash(a) == graph_hash(b));
    CHECK(graph_hash(a) != graph_hash(c));

    // mean out-degree lands near the requested value
    double mean = double(a.edge_count()) / double(a.n);
    CHECK(mean > 6.0);
    CHECK(mean < 10.0);

    // out-neighbor lists have no repeats
    std::map<std::uint32_t, std::set<std::uint32_t>> out;
    for (const auto& [s, d] : a.edges) CHECK(out[s].insert(d).second);
}

TEST_CASE("clique chain bridge count is validated") {
    CHECK_THROWS_AS(dag_of_cliques(2, 2, 5, 1), std::invalid_argument);
}

// ================================================================ v vectors

TEST_CASE("generated personalization vectors are unit mass") {
    for (auto mode : {PersonalizationMode::nonnegative, PersonalizationMode::signed_sum}) {
        auto v = gen_personalization(500, 7, mode);
        CHECK(v.size() == 500);
        CHECK(ts::sum(v.v) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.generated);
        CHECK(v.seed == 7);
        if (mode == PersonalizationMode::nonnegative) {
            for (double x : v.v) CHECK(x >= 0.0);
            CHECK(v.l1_norm() == doctest::Approx(1.0));
        } else {
            CHECK(std::any_of(v.v.begin(), v.v.end(), [](double x) { return x < 0.0; }));
            CHECK(v.l1_norm() > 1.0);
        }
    }
}

TEST_CASE("generated vectors are reproducible and seed-sensitive") {
    auto a = gen_personalization(64, 3, PersonalizationMode::nonnegative);
    auto b = gen_personalization(64, 3, PersonalizationMode::nonnegative);
    auto c = gen_personalization(64, 4, PersonalizationMode::nonnegative);
    CHECK(a.v == b.v);
    CHECK(a.v != c.v);
}

TEST_CASE("external vectors are validated") {
    CHECK_THROWS_AS(personalization_from_values({}, PersonalizationMode::nonnegative),
                    std::invalid_argument);
    CHECK_THROWS_AS(personalization_from_values({0.5, 0.6}, PersonalizationMode::nonnegative),
                    std::invalid_argument); // mass off
    CHECK_THROWS_AS(personalization_from_values({-0.5, 1.5}, PersonalizationMode::nonnegative),
                    std::invalid_argument); // negative entry
    CHECK_NOTHROW(personalization_from_values({-0.5, 1.5}, PersonalizationMode::signed_sum));
    CHECK_THROWS_AS(personalization_from_values({0.5, std::nan("")},
                                                PersonalizationMode::nonnegative),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_personalization(0, 1, PersonalizationMode::nonnegative),
                    std::invalid_argument);
}

TEST_CASE("counter prng is stateless and shifted by seed") {
    CHECK(splitmix64(1, 5) == splitmix64(1, 5));
    CHECK(splitmix64(1, 5) != splitmix64(2, 5));
    double u = uniform01(9, 0);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    // normals are standard-ish over a modest sample
    double s = 0.0, s2 = 0.0;
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
        double z = standard_normal(123, i);
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / N) < 0.03);
    CHECK(std::abs(s2 / N - 1.0) < 0.05);
}
