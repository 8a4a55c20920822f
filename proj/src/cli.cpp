#include "damprank/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "damprank/analysis.hpp"
#include "damprank/basis_io.hpp"
#include "damprank/column_stochastic.hpp"
#include "damprank/edge_graph.hpp"
#include "damprank/errors.hpp"
#include "damprank/fixtures.hpp"
#include "damprank/format.hpp"
#include "damprank/kernels.hpp"
#include "damprank/krylov.hpp"
#include "damprank/personalization.hpp"
#include "damprank/scc.hpp"
#include "damprank/solvers.hpp"
#include "damprank/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace damprank::cli {
namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
    double lap_ms() {
        auto now = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(now - last).count();
        last = now;
        return ms;
    }
};

struct Common {
    std::string graph;
    std::string format = "tsv";
    std::string dangling = "patch";
    std::string basis_path;
    std::string pv_file;
    std::string pv_mode = "nonnegative";
    std::string config;
    std::uint64_t seed = 0;
    std::string out = ".";
    int threads = 1;
    bool strict = false;
    double tol = 1e-14;        // basis breakdown tolerance
    double eps = 1e-12;        // series truncation mass
    double solver_tol = 1e-12; // iterative solver residual
    std::size_t m_max = 256;
    std::size_t max_iter = 200000;

    int effective_threads() const { return strict ? 1 : threads; }
};

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

double parse_double(const std::string& text, const char* what) {
    double x = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc{} || ptr != last)
        throw std::invalid_argument(std::string(what) + ": not a number: " + text);
    return x;
}

std::int64_t parse_int(const std::string& text, const char* what) {
    std::int64_t x = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc{} || ptr != last)
        throw std::invalid_argument(std::string(what) + ": not an integer: " + text);
    return x;
}

bool parse_bool(const std::string& text, const char* what) {
    const std::string t = lower(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw std::invalid_argument(std::string(what) + ": not a boolean: " + text);
}

DanglingMode dangling_of(const std::string& s) {
    if (s == "error") return DanglingMode::error;
    if (s == "patch" || s == "patch_v") return DanglingMode::patch_v;
    if (s == "uniform") return DanglingMode::uniform;
    if (s == "leave") return DanglingMode::leave;
    throw std::invalid_argument("unknown dangling mode: " + s);
}

PersonalizationMode pv_mode_of(const std::string& s) {
    if (s == "nonnegative") return PersonalizationMode::nonnegative;
    if (s == "signed") return PersonalizationMode::signed_sum;
    throw std::invalid_argument("unknown personalization mode: " + s);
}

EdgeGraph load_graph(const Common& c) {
    if (c.graph.empty())
        throw std::invalid_argument("--graph is required for this command");
    return parse_edge_list(c.graph, c.format == "konect" ? EdgeFormat::konect : EdgeFormat::tsv);
}

std::vector<double> read_value_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw data_error("cannot open vector file: " + p.string());
    std::vector<double> vals;
    double x = 0.0;
    while (f >> x) vals.push_back(x);
    if (!f.eof()) throw data_error("non-numeric content in vector file: " + p.string());
    return vals;
}

PersonalizationVector make_v(const Common& c, std::size_t n) {
    const PersonalizationMode mode = pv_mode_of(c.pv_mode);
    if (!c.pv_file.empty()) {
        auto vals = read_value_file(c.pv_file);
        if (vals.size() != n)
            throw std::invalid_argument("vector file has " + std::to_string(vals.size()) +
                                        " entries, graph has " + std::to_string(n) + " nodes");
        return personalization_from_values(std::move(vals), mode);
    }
    return gen_personalization(n, c.seed, mode);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw data_error("cannot open output file: " + p.string());
    return f;
}

void note_artifact(const fs::path& p) { std::cerr << "wrote " << p.string() << "\n"; }

ordered_json config_echo(const Common& c) {
    ordered_json j;
    j["graph"] = c.graph;
    j["format"] = c.format;
    j["dangling"] = c.dangling;
    j["basis"] = c.basis_path;
    j["pv_file"] = c.pv_file;
    j["pv_mode"] = c.pv_mode;
    j["config"] = c.config;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["threads"] = c.threads;
    j["threads_effective"] = c.effective_threads();
    j["strict"] = c.strict;
    j["tol"] = c.tol;
    j["eps"] = c.eps;
    j["solver_tol"] = c.solver_tol;
    j["m_max"] = c.m_max;
    j["max_iter"] = c.max_iter;
    return j;
}

ordered_json start_run(const Common& c, const std::string& command) {
    ordered_json run;
    run["schema"] = run_json_schema;
    run["command"] = command;
    run["versions"] = ordered_json{{"damprank", version}};
    run["config"] = config_echo(c);
    return run;
}

void put_graph_info(ordered_json& run, const EdgeGraph& g, const ColumnStochastic* P) {
    ordered_json j;
    j["n"] = g.n;
    j["edges"] = g.edge_count();
    j["hash"] = hex64(graph_hash(g));
    if (P) j["dangling"] = P->dangling_count();
    run["graph"] = std::move(j);
}

void put_basis_info(ordered_json& run, const KrylovBasis& b) {
    ordered_json j;
    j["m"] = b.m;
    j["sigma"] = b.sigma;
    j["happy"] = b.happy;
    j["breakdown_residual"] = b.breakdown_residual();
    j["graph_hash"] = hex64(b.graph_hash);
    run["basis"] = std::move(j);
}

void finish_run(const Common& c, ordered_json run, ordered_json timings) {
    run["timings"] = std::move(timings);
    const fs::path p = fs::path(c.out) / "run.json";
    auto f = open_out(p);
    f << run.dump(2) << "\n";
    note_artifact(p);
}

// Everything a basis-consuming command needs; built fresh from --graph or
// reloaded from --basis (in which case the graph is optional and only used
// for labels and a hash cross-check).
struct Workspace {
    std::optional<EdgeGraph> graph;
    std::optional<ColumnStochastic> P;
    std::optional<PersonalizationVector> v;
    KrylovBasis basis;

    std::string node_label(std::size_t i) const {
        return graph ? graph->label(i) : std::to_string(i);
    }
};

Workspace make_workspace(const Common& c, ordered_json& timings) {
    Workspace w;
    Stopwatch sw;
    if (!c.basis_path.empty()) {
        w.basis = load_basis(c.basis_path);
        timings["load_basis_ms"] = sw.lap_ms();
        if (!c.graph.empty()) {
            w.graph = load_graph(c);
            timings["parse_ms"] = sw.lap_ms();
            if (graph_hash(*w.graph) != w.basis.graph_hash)
                throw data_error("graph hash mismatch: basis was built from a different graph");
        }
        return w;
    }
    w.graph = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();
    w.v = make_v(c, w.graph->n);
    w.P = ColumnStochastic::build(*w.graph, dangling_of(c.dangling), &*w.v);
    timings["build_ms"] = sw.lap_ms();
    w.basis = arnoldi_build(*w.P, *w.v, c.tol, c.m_max);
    timings["basis_ms"] = sw.lap_ms();
    return w;
}

// ---------------------------------------------------------------- convert

void run_convert(const Common& c) {
    ordered_json timings;
    Stopwatch sw;
    auto g = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path edges_path = fs::path(c.out) / "edges.tsv";
    {
        auto f = open_out(edges_path);
        for (const auto& [s, d] : g.edges) f << s << "\t" << d << "\n";
    }
    note_artifact(edges_path);
    const fs::path nodes_path = fs::path(c.out) / "nodes.csv";
    {
        auto f = open_out(nodes_path);
        f << "node,label\n";
        for (std::size_t i = 0; i < g.n; ++i) f << i << "," << g.label(i) << "\n";
    }
    note_artifact(nodes_path);

    std::vector<std::uint8_t> has_out(g.n, 0);
    for (const auto& e : g.edges) has_out[e.first] = 1;
    const auto dangling =
        static_cast<std::size_t>(std::count(has_out.begin(), has_out.end(), 0));
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "convert");
    put_graph_info(run, g, nullptr);
    run["graph"]["dangling"] = dangling;
    run["graph"]["declared_symmetric"] = g.declared_symmetric;
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- scc

void run_scc(const Common& c) {
    ordered_json timings;
    Stopwatch sw;
    auto g = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();
    auto ordering = scc_blocks(g);
    timings["scc_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path blocks_path = fs::path(c.out) / "blocks.csv";
    {
        auto f = open_out(blocks_path);
        f << "block_id,size\n";
        for (std::size_t b = 0; b < ordering.block_count(); ++b)
            f << b << "," << ordering.block_size(b) << "\n";
    }
    note_artifact(blocks_path);
    const fs::path perm_path = fs::path(c.out) / "permutation.csv";
    {
        auto f = open_out(perm_path);
        f << "node_label,block_id,position\n";
        for (std::size_t i = 0; i < g.n; ++i)
            f << g.label(i) << "," << ordering.block_id[i] << "," << ordering.position[i] << "\n";
    }
    note_artifact(perm_path);
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "scc");
    put_graph_info(run, g, nullptr);
    run["scc"] = ordered_json{{"block_count", ordering.block_count()},
                              {"lscc_index", ordering.lscc_index},
                              {"lscc_size", ordering.block_size(ordering.lscc_index)}};
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- basis

void run_basis(const Common& c, const std::string& basis_name) {
    ordered_json timings;
    auto w = make_workspace(c, timings);
    Stopwatch sw;
    fs::create_directories(c.out);
    const fs::path basis_path = fs::path(c.out) / basis_name;
    save_basis(basis_path, w.basis);
    note_artifact(basis_path);
    timings["save_ms"] = sw.lap_ms();

    auto run = start_run(c, "basis");
    if (w.graph) put_graph_info(run, *w.graph, w.P ? &*w.P : nullptr);
    put_basis_info(run, w.basis);
    run["basis"]["file"] = basis_path.string();
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- rank

void run_rank(const Common& c, const std::vector<std::string>& kernel_specs,
              bool want_derivative) {
    if (kernel_specs.empty()) throw std::invalid_argument("at least one --kernel is required");
    std::vector<RankJob> jobs;
    for (const auto& text : kernel_specs) {
        auto spec = parse_kernel_spec(text);
        jobs.push_back(RankJob{spec.kernel, spec.rhos, want_derivative, true});
    }

    ordered_json timings;
    auto w = make_workspace(c, timings);
    Stopwatch sw;
    auto rows = batch_rank(w.basis, jobs, c.eps, c.effective_threads());
    timings["eval_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    ordered_json row_log = ordered_json::array();
    std::size_t failed = 0;
    for (const auto& row : rows) {
        ordered_json rj;
        rj["kernel"] = row.kernel_id;
        rj["rho"] = row.rho;
        rj["ok"] = row.ok;
        if (!row.ok) {
            rj["error"] = row.error;
            ++failed;
            row_log.push_back(std::move(rj));
            continue;
        }
        const fs::path p =
            fs::path(c.out) / ("rank_" + row.kernel_id + "_" + format_double(row.rho) + ".csv");
        auto f = open_out(p);
        if (want_derivative) {
            f << "node,score,derivative\n";
            const auto& x = *row.lifted;
            const auto& xd = *row.lifted_derivative;
            for (std::size_t i = 0; i < x.size(); ++i)
                f << w.node_label(i) << "," << format_double(x[i]) << ","
                  << format_double(xd[i]) << "\n";
        } else {
            f << "node,score\n";
            const auto& x = *row.lifted;
            for (std::size_t i = 0; i < x.size(); ++i)
                f << w.node_label(i) << "," << format_double(x[i]) << "\n";
        }
        note_artifact(p);
        rj["file"] = p.string();
        rj["K_used"] = row.coeffs->K_used;
        rj["tail_bound"] = row.coeffs->tail_bound;
        row_log.push_back(std::move(rj));
    }
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "rank");
    if (w.graph) put_graph_info(run, *w.graph, w.P ? &*w.P : nullptr);
    put_basis_info(run, w.basis);
    run["rows"] = std::move(row_log);
    finish_run(c, std::move(run), std::move(timings));
    if (failed > 0)
        throw numeric_error(std::to_string(failed) + " of " + std::to_string(rows.size()) +
                            " rank evaluations failed; see run.json");
}

// ---------------------------------------------------------------- sweep

void run_sweep(const Common& c, const std::string& kernel_spec, bool with_cold) {
    if (kernel_spec.empty()) throw std::invalid_argument("--kernel is required");
    auto spec = parse_kernel_spec(kernel_spec);
    if (spec.kernel.family() != KernelFamily::geometric)
        throw std::invalid_argument("sweep drives the iterative solver and is geometric-only");
    if (spec.rhos.size() < 2)
        throw std::invalid_argument("sweep needs an alpha range, e.g. "
                                    "geometric:alpha=0.70:0.97:0.01");

    ordered_json timings;
    Stopwatch sw;
    auto g = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();
    auto v = make_v(c, g.n);
    auto P = ColumnStochastic::build(g, dangling_of(c.dangling), &v);
    timings["build_ms"] = sw.lap_ms();
    auto cascade = cascade_sweep(P, v, spec.rhos, c.solver_tol, with_cold, c.max_iter);
    timings["sweep_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path p = fs::path(c.out) / "cascade.csv";
    {
        auto f = open_out(p);
        f << "alpha,iterations,residual,converged";
        if (with_cold) f << ",cold_iterations";
        f << "\n";
        for (std::size_t i = 0; i < cascade.alphas.size(); ++i) {
            const auto& r = cascade.warm[i].report;
            f << format_double(cascade.alphas[i]) << "," << r.iterations << ","
              << format_double(r.final_residual) << "," << (r.converged ? 1 : 0);
            if (with_cold) f << "," << cascade.cold[i].iterations;
            f << "\n";
        }
    }
    note_artifact(p);
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "sweep");
    put_graph_info(run, g, &P);
    std::size_t warm_le_cold = 0;
    std::size_t warm_total = 0, cold_total = 0;
    for (std::size_t i = 0; i < cascade.alphas.size(); ++i) {
        warm_total += cascade.warm[i].report.iterations;
        if (with_cold) {
            cold_total += cascade.cold[i].iterations;
            if (cascade.warm[i].report.iterations <= cascade.cold[i].iterations) ++warm_le_cold;
        }
    }
    ordered_json sj;
    sj["points"] = cascade.alphas.size();
    sj["warm_iterations_total"] = warm_total;
    if (with_cold) {
        sj["cold_iterations_total"] = cold_total;
        sj["warm_le_cold_points"] = warm_le_cold;
    }
    run["sweep"] = std::move(sj);
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- kl

void run_kl(const Common& c, const std::vector<std::string>& kernel_specs, double rho_o) {
    if (kernel_specs.empty()) throw std::invalid_argument("at least one --kernel is required");
    if (std::isnan(rho_o)) throw std::invalid_argument("--rho-o is required");
    const std::vector<double> fd_steps = {0.002, 0.008};

    ordered_json timings;
    auto w = make_workspace(c, timings);
    Stopwatch sw;

    fs::create_directories(c.out);
    ordered_json sweeps = ordered_json::array();
    for (const auto& text : kernel_specs) {
        auto spec = parse_kernel_spec(text);
        auto result =
            kl_sweep(w.basis, spec.kernel, spec.rhos, rho_o, fd_steps, c.eps,
                     c.effective_threads());
        const fs::path p = fs::path(c.out) / ("kl_" + result.kernel_id + ".csv");
        auto f = open_out(p);
        f << "kernel,rho,rho_o,kl_nats,dkl_analytic,dkl_fd_0.002,dkl_fd_0.008\n";
        for (const auto& rec : result.records) {
            f << result.kernel_id << "," << format_double(rec.rho) << ","
              << format_double(result.rho_o) << "," << format_double(rec.kl) << ","
              << format_double(rec.dkl_analytic) << "," << format_double(rec.dkl_empirical[0])
              << "," << format_double(rec.dkl_empirical[1]) << "\n";
        }
        note_artifact(p);
        sweeps.push_back(ordered_json{{"kernel", result.kernel_id},
                                      {"rho_o", result.rho_o},
                                      {"points", result.records.size()},
                                      {"file", p.string()}});
    }
    timings["sweep_ms"] = sw.lap_ms();

    auto run = start_run(c, "kl");
    if (w.graph) put_graph_info(run, *w.graph, w.P ? &*w.P : nullptr);
    put_basis_info(run, w.basis);
    run["kl"] = std::move(sweeps);
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- compare

std::vector<DampingKernel> families_of(const std::string& list) {
    std::vector<DampingKernel> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        auto comma = list.find(',', pos);
        if (comma == std::string::npos) comma = list.size();
        std::string tok = lower(list.substr(pos, comma - pos));
        pos = comma + 1;
        if (tok.empty()) continue;
        if (tok == "geometric") {
            out.push_back(DampingKernel::geometric());
        } else if (tok == "poisson") {
            out.push_back(DampingKernel::poisson());
        } else if (tok == "log" || tok == "logarithmic") {
            out.push_back(DampingKernel::logarithmic());
        } else if (tok.rfind("cmp", 0) == 0) {
            const std::string prefix = "cmp:nu=";
            if (tok.rfind(prefix, 0) != 0)
                throw std::invalid_argument("cmp family needs a shape, e.g. cmp:nu=1.5");
            out.push_back(DampingKernel::cmp(parse_double(tok.substr(prefix.size()), "nu")));
        } else {
            throw std::invalid_argument("unknown family: " + tok);
        }
    }
    if (out.empty()) throw std::invalid_argument("--families expanded to an empty list");
    return out;
}

void run_compare(const Common& c, double alpha, const std::string& families_list,
                 std::size_t bins) {
    if (std::isnan(alpha)) throw std::invalid_argument("--alpha is required");
    auto families = families_of(families_list);

    ordered_json timings;
    auto w = make_workspace(c, timings);
    Stopwatch sw;
    auto result = correspondence_compare(w.basis, alpha, families, c.eps, bins);
    timings["compare_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path cmp_path = fs::path(c.out) / "compare.csv";
    {
        auto f = open_out(cmp_path);
        f << "family,rho_star,mean_steps\n";
        for (const auto& fam : result.families)
            f << fam.family << "," << format_double(fam.rho_star) << ","
              << format_double(fam.mean) << "\n";
    }
    note_artifact(cmp_path);
    for (const auto& fam : result.families) {
        const fs::path p = fs::path(c.out) / ("hist_" + fam.family + ".csv");
        auto f = open_out(p);
        f << "bin_left,bin_right,count\n";
        for (std::size_t b = 0; b + 1 < fam.hist.bin_edges.size(); ++b)
            f << format_double(fam.hist.bin_edges[b]) << ","
              << format_double(fam.hist.bin_edges[b + 1]) << "," << fam.hist.counts[b] << "\n";
        note_artifact(p);
    }
    const fs::path kl_path = fs::path(c.out) / "pairwise_kl.csv";
    {
        auto f = open_out(kl_path);
        f << "family";
        for (const auto& fam : result.families) f << "," << fam.family;
        f << "\n";
        for (std::size_t i = 0; i < result.families.size(); ++i) {
            f << result.families[i].family;
            for (std::size_t j = 0; j < result.families.size(); ++j)
                f << "," << format_double(result.pairwise_kl[i][j]);
            f << "\n";
        }
    }
    note_artifact(kl_path);
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "compare");
    if (w.graph) put_graph_info(run, *w.graph, w.P ? &*w.P : nullptr);
    put_basis_info(run, w.basis);
    run["reference_alpha"] = result.reference_alpha;
    run["target_mean"] = result.target_mean;
    ordered_json corr;
    for (const auto& fam : result.families) {
        corr[fam.family] = fam.rho_star;
        if (fam.family == "poisson") run["beta"] = fam.rho_star;
        if (fam.family == "logarithmic") run["gamma"] = fam.rho_star;
    }
    run["correspondence"] = std::move(corr);
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- dim

void run_dim(const Common& c, std::size_t k_max, double cutoff) {
    ordered_json timings;
    Stopwatch sw;
    auto g = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();
    auto v = make_v(c, g.n);
    auto P = ColumnStochastic::build(g, dangling_of(c.dangling), &v);
    timings["build_ms"] = sw.lap_ms();

    auto rkk = krylov_rrqr_diag(P, v, k_max);
    const auto rrqr_dim = numerical_dimension(rkk, cutoff);
    timings["rrqr_ms"] = sw.lap_ms();
    auto basis = arnoldi_build(P, v, c.tol, k_max);
    timings["basis_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path rrqr_path = fs::path(c.out) / "rrqr_diag.csv";
    {
        auto f = open_out(rrqr_path);
        f << "k,rkk\n";
        for (std::size_t k = 0; k < rkk.size(); ++k)
            f << (k + 1) << "," << format_double(rkk[k]) << "\n";
    }
    note_artifact(rrqr_path);
    const fs::path res_path = fs::path(c.out) / "arnoldi_residuals.csv";
    {
        auto f = open_out(res_path);
        f << "k,residual\n";
        for (std::size_t k = 0; k < basis.residuals.size(); ++k)
            f << (k + 1) << "," << format_double(basis.residuals[k]) << "\n";
    }
    note_artifact(res_path);
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "dim");
    put_graph_info(run, g, &P);
    put_basis_info(run, basis);
    run["dimension"] = ordered_json{{"k_max", k_max},
                                    {"cutoff", cutoff},
                                    {"rrqr", rrqr_dim},
                                    {"arnoldi", basis.m},
                                    {"arnoldi_happy", basis.happy}};
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- solve

void run_solve(const Common& c, const std::string& method, const std::string& kernel_spec) {
    if (method.empty()) throw std::invalid_argument("--method is required");
    if (kernel_spec.empty()) throw std::invalid_argument("--kernel is required");
    auto spec = parse_kernel_spec(kernel_spec);
    if (spec.rhos.size() != 1)
        throw std::invalid_argument("solve takes exactly one parameter value");
    const double rho = spec.rhos[0];
    const bool geometric = spec.kernel.family() == KernelFamily::geometric;
    if (method != "series" && !geometric)
        throw std::invalid_argument("method `" + method + "` is geometric-only; "
                                    "use --method series for other families");

    ordered_json timings;
    Stopwatch sw;
    auto g = load_graph(c);
    timings["parse_ms"] = sw.lap_ms();
    auto v = make_v(c, g.n);
    auto P = ColumnStochastic::build(g, dangling_of(c.dangling), &v);
    timings["build_ms"] = sw.lap_ms();

    std::vector<double> x;
    ordered_json report;
    report["method"] = method;
    if (method == "power") {
        auto r = power_method(P, v, rho, c.solver_tol, c.max_iter);
        x = std::move(r.x);
        report["iterations"] = r.report.iterations;
        report["residual"] = r.report.final_residual;
        report["converged"] = r.report.converged;
        if (!r.report.converged) throw numeric_error("power method did not converge");
    } else if (method == "gs") {
        auto r = gauss_seidel(P, v, rho, c.solver_tol, c.max_iter);
        x = std::move(r.x);
        report["iterations"] = r.report.iterations;
        report["residual"] = r.report.final_residual;
        report["converged"] = r.report.converged;
        if (!r.report.converged) throw numeric_error("gauss-seidel did not converge");
    } else if (method == "series") {
        auto r = direct_series(P, v, spec.kernel, rho, c.eps);
        x = std::move(r.x);
        report["K_used"] = r.K_used;
        report["tail_bound"] = r.tail_bound;
    } else if (method == "block") {
        auto ordering = scc_blocks(g);
        x = block_solve(P, ordering, v, rho, c.solver_tol, c.max_iter);
        report["blocks"] = ordering.block_count();
    } else {
        throw std::invalid_argument("unknown method: " + method);
    }
    timings["solve_ms"] = sw.lap_ms();

    fs::create_directories(c.out);
    const fs::path p = fs::path(c.out) / "solution.csv";
    {
        auto f = open_out(p);
        f << "node,score\n";
        for (std::size_t i = 0; i < x.size(); ++i)
            f << g.label(i) << "," << format_double(x[i]) << "\n";
    }
    note_artifact(p);
    timings["write_ms"] = sw.lap_ms();

    auto run = start_run(c, "solve");
    put_graph_info(run, g, &P);
    report["kernel"] = spec.kernel.name();
    report["rho"] = rho;
    run["solve"] = std::move(report);
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- selftest

void run_selftest(const Common& c) {
    ordered_json timings;
    Stopwatch sw;
    ordered_json checks = ordered_json::array();
    auto check = [&](const std::string& name, double err, double bound) {
        checks.push_back(
            ordered_json{{"name", name}, {"error", err}, {"bound", bound}, {"ok", err <= bound}});
        std::cout << (err <= bound ? "ok" : "FAIL") << ": " << name
                  << " (err " << format_double(err) << ", bound " << format_double(bound) << ")\n";
        if (err > bound) throw numeric_error("selftest failed: " + name);
    };

    {
        auto g = cycle_graph(3);
        auto v = personalization_from_values({1.0, 0.0, 0.0}, PersonalizationMode::nonnegative);
        auto P = ColumnStochastic::build(g, DanglingMode::error);
        const double expect[3] = {4.0 / 7, 2.0 / 7, 1.0 / 7};
        auto gs = gauss_seidel(P, v, 0.5, 1e-14);
        auto series = direct_series(P, v, DampingKernel::geometric(), 0.5, 1e-14);
        auto basis = arnoldi_build(P, v);
        auto lifted = lift(basis, eval_series_coeffs(basis, DampingKernel::geometric(), 0.5).coeffs);
        double e1 = 0, e2 = 0, e3 = 0;
        for (int i = 0; i < 3; ++i) {
            e1 = std::max(e1, std::abs(gs.x[i] - expect[i]));
            e2 = std::max(e2, std::abs(series.x[i] - expect[i]));
            e3 = std::max(e3, std::abs(lifted[i] - expect[i]));
        }
        check("three-cycle closed form, gauss-seidel", e1, 1e-11);
        check("three-cycle closed form, direct series", e2, 1e-11);
        check("three-cycle closed form, krylov lift", e3, 1e-11);
    }
    {
        const double beta = correspondence_solve(DampingKernel::poisson(), 0.85 / 0.15);
        const double gamma = correspondence_solve(DampingKernel::logarithmic(), 0.85 / 0.15);
        check("corresponding beta at 0.85", std::abs(beta - 17.0 / 3.0), 1e-12);
        check("corresponding gamma at 0.85", std::abs(gamma - 0.94146), 5e-5);
    }
    {
        auto g = random_graph(200, 8.0, 11);
        auto v = gen_personalization(g.n, 11, PersonalizationMode::nonnegative);
        auto P = ColumnStochastic::build(g, DanglingMode::patch_v, &v);
        auto basis = arnoldi_build(P, v);
        auto x = lift(basis, eval_series_coeffs(basis, DampingKernel::geometric(), 0.85).coeffs);
        auto gs = gauss_seidel(P, v, 0.85, 1e-13);
        double rel = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            rel = std::max(rel, std::abs(x[i] - gs.x[i]) / std::max(1e-300, std::abs(gs.x[i])));
        check("krylov vs gauss-seidel, n=200", rel, 1e-10);
    }
    timings["selftest_ms"] = sw.lap_ms();
    std::cout << "selftest passed\n";

    fs::create_directories(c.out);
    auto run = start_run(c, "selftest");
    run["checks"] = std::move(checks);
    finish_run(c, std::move(run), std::move(timings));
}

// ---------------------------------------------------------------- wiring

void add_graph_opts(CLI::App* s, Common& c, bool required) {
    auto* g = s->add_option("--graph", c.graph, "edge list file");
    g->check(CLI::ExistingFile);
    if (required) g->required();
    s->add_option("--format", c.format, "edge list dialect")
        ->check(CLI::IsMember({"tsv", "konect"}))
        ->capture_default_str();
    s->add_option("--dangling", c.dangling, "dangling column treatment")
        ->check(CLI::IsMember({"error", "patch", "patch_v", "uniform", "leave"}))
        ->capture_default_str();
}

void add_v_opts(CLI::App* s, Common& c) {
    s->add_option("--seed", c.seed, "seed for the generated personalization vector")
        ->capture_default_str();
    s->add_option("--pv-file", c.pv_file, "personalization vector file (one value per line)")
        ->check(CLI::ExistingFile);
    s->add_option("--pv-mode", c.pv_mode, "personalization sign convention")
        ->check(CLI::IsMember({"nonnegative", "signed"}))
        ->capture_default_str();
}

void add_run_opts(CLI::App* s, Common& c) {
    s->add_option("--out", c.out, "output directory")->capture_default_str();
    s->add_option("--threads", c.threads, "worker threads for batch evaluation")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
    s->add_flag("--strict", c.strict, "bit-exact sequential mode (forces --threads 1)");
    s->add_option("--config", c.config, "key = value config file; flags take precedence")
        ->check(CLI::ExistingFile);
}

void add_numeric_opts(CLI::App* s, Common& c) {
    s->add_option("--tol", c.tol, "basis breakdown tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--eps", c.eps, "series truncation mass")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--solver-tol", c.solver_tol, "iterative solver residual tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--m-max", c.m_max, "basis size cap")->capture_default_str();
    s->add_option("--max-iter", c.max_iter, "iteration cap for solvers")->capture_default_str();
}

void add_basis_opt(CLI::App* s, Common& c) {
    s->add_option("--basis", c.basis_path, "reuse a saved basis instead of building one")
        ->check(CLI::ExistingFile);
}

// ------------------------------------------------------------- config file
// `key = value` lines, `#` comments. Values land on the same variables the
// flags bind to, before the command line is parsed, so flags win.

std::string trim(std::string s) {
    auto sp = [](unsigned char ch) { return std::isspace(ch) != 0; };
    while (!s.empty() && sp(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && sp(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw std::invalid_argument("cannot open config file: " + p.string());
    std::vector<std::pair<std::string, std::string>> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(p.string() + ":" + std::to_string(line_no) +
                                        ": expected `key = value`");
        std::string key = lower(trim(line.substr(0, eq)));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        for (char& ch : key)
            if (ch == '_') ch = '-';
        if (key.empty()) throw std::invalid_argument(p.string() + ":" +
                                                     std::to_string(line_no) + ": empty key");
        items.emplace_back(std::move(key), std::move(value));
    }
    return items;
}

using ConfigSetters = std::map<std::string, std::function<void(const std::string&)>>;

void apply_config(const fs::path& p, const ConfigSetters& setters) {
    for (const auto& [key, value] : read_config_file(p)) {
        auto it = setters.find(key);
        if (it == setters.end())
            throw std::invalid_argument("unknown config key: " + key);
        it->second(value);
    }
}

} // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"damping-model rank engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version);

    Common c;
    std::string basis_name = "basis.bin";
    std::vector<std::string> rank_kernels;
    bool rank_derivative = false;
    std::string sweep_kernel;
    bool sweep_cold = false;
    std::vector<std::string> kl_kernels;
    double rho_o = std::numeric_limits<double>::quiet_NaN();
    double cmp_alpha = std::numeric_limits<double>::quiet_NaN();
    std::string cmp_families = "geometric,poisson,log";
    std::size_t cmp_bins = 100;
    std::size_t k_max = 128;
    double cutoff = 1e-17;
    std::string method;
    std::string solve_kernel;

    // Config keys share the flag variables; the file is applied before the
    // command line is parsed, so flags override it and defaults lose to both.
    const ConfigSetters setters = {
        {"graph", [&](const std::string& s) { c.graph = s; }},
        {"format", [&](const std::string& s) { c.format = s; }},
        {"dangling", [&](const std::string& s) { c.dangling = s; }},
        {"basis", [&](const std::string& s) { c.basis_path = s; }},
        {"pv-file", [&](const std::string& s) { c.pv_file = s; }},
        {"pv-mode", [&](const std::string& s) { c.pv_mode = s; }},
        {"seed",
         [&](const std::string& s) {
             c.seed = static_cast<std::uint64_t>(parse_int(s, "seed"));
         }},
        {"out", [&](const std::string& s) { c.out = s; }},
        {"threads",
         [&](const std::string& s) { c.threads = static_cast<int>(parse_int(s, "threads")); }},
        {"strict", [&](const std::string& s) { c.strict = parse_bool(s, "strict"); }},
        {"tol", [&](const std::string& s) { c.tol = parse_double(s, "tol"); }},
        {"eps", [&](const std::string& s) { c.eps = parse_double(s, "eps"); }},
        {"solver-tol",
         [&](const std::string& s) { c.solver_tol = parse_double(s, "solver-tol"); }},
        {"m-max",
         [&](const std::string& s) {
             c.m_max = static_cast<std::size_t>(parse_int(s, "m-max"));
         }},
        {"max-iter",
         [&](const std::string& s) {
             c.max_iter = static_cast<std::size_t>(parse_int(s, "max-iter"));
         }},
        {"name", [&](const std::string& s) { basis_name = s; }},
        {"kernel",
         [&](const std::string& s) {
             rank_kernels = {s};
             kl_kernels = {s};
             sweep_kernel = s;
             solve_kernel = s;
         }},
        {"derivative",
         [&](const std::string& s) { rank_derivative = parse_bool(s, "derivative"); }},
        {"cold", [&](const std::string& s) { sweep_cold = parse_bool(s, "cold"); }},
        {"rho-o", [&](const std::string& s) { rho_o = parse_double(s, "rho-o"); }},
        {"alpha", [&](const std::string& s) { cmp_alpha = parse_double(s, "alpha"); }},
        {"families", [&](const std::string& s) { cmp_families = s; }},
        {"bins",
         [&](const std::string& s) { cmp_bins = static_cast<std::size_t>(parse_int(s, "bins")); }},
        {"k-max",
         [&](const std::string& s) { k_max = static_cast<std::size_t>(parse_int(s, "k-max")); }},
        {"cutoff", [&](const std::string& s) { cutoff = parse_double(s, "cutoff"); }},
        {"method", [&](const std::string& s) { method = s; }},
    };

    auto* conv = app.add_subcommand("convert", "normalize an edge list to internal ids");
    add_graph_opts(conv, c, true);
    add_run_opts(conv, c);
    conv->callback([&] { run_convert(c); });

    auto* scc = app.add_subcommand("scc", "block-triangular ordering by strongly "
                                          "connected components");
    add_graph_opts(scc, c, true);
    add_run_opts(scc, c);
    scc->callback([&] { run_scc(c); });

    auto* basis = app.add_subcommand("basis", "build and save a reusable basis");
    add_graph_opts(basis, c, true);
    add_v_opts(basis, c);
    add_run_opts(basis, c);
    add_numeric_opts(basis, c);
    basis->add_option("--name", basis_name, "basis file name inside --out")
        ->capture_default_str();
    basis->callback([&] { run_basis(c, basis_name); });

    auto* rank = app.add_subcommand("rank", "evaluate damping models");
    add_graph_opts(rank, c, false);
    add_v_opts(rank, c);
    add_run_opts(rank, c);
    add_numeric_opts(rank, c);
    add_basis_opt(rank, c);
    rank->add_option("--kernel", rank_kernels,
                     "kernel spec, e.g. geometric:alpha=0.85 (repeatable)");
    rank->add_flag("--derivative", rank_derivative, "emit parameter derivatives too");
    rank->callback([&] { run_rank(c, rank_kernels, rank_derivative); });

    auto* sweep = app.add_subcommand("sweep", "warm-started solver cascade over an "
                                              "alpha grid");
    add_graph_opts(sweep, c, true);
    add_v_opts(sweep, c);
    add_run_opts(sweep, c);
    add_numeric_opts(sweep, c);
    sweep->add_option("--kernel", sweep_kernel,
                      "geometric range spec, e.g. geometric:alpha=0.70:0.97:0.01");
    sweep->add_flag("--cold", sweep_cold, "also run cold-start controls");
    sweep->callback([&] { run_sweep(c, sweep_kernel, sweep_cold); });

    auto* kl = app.add_subcommand("kl", "divergence sweep against a reference parameter");
    add_graph_opts(kl, c, false);
    add_v_opts(kl, c);
    add_run_opts(kl, c);
    add_numeric_opts(kl, c);
    add_basis_opt(kl, c);
    kl->add_option("--kernel", kl_kernels, "kernel spec with the grid values (repeatable)");
    kl->add_option("--rho-o", rho_o, "reference parameter value");
    kl->callback([&] { run_kl(c, kl_kernels, rho_o); });

    auto* cmp = app.add_subcommand("compare", "cross-model comparison at corresponding "
                                              "parameters");
    add_graph_opts(cmp, c, false);
    add_v_opts(cmp, c);
    add_run_opts(cmp, c);
    add_numeric_opts(cmp, c);
    add_basis_opt(cmp, c);
    cmp->add_option("--alpha", cmp_alpha, "reference geometric parameter");
    cmp->add_option("--families", cmp_families,
                    "comma list: geometric,poisson,log,cmp:nu=<v>")
        ->capture_default_str();
    cmp->add_option("--bins", cmp_bins, "histogram bin count")->capture_default_str();
    cmp->callback([&] { run_compare(c, cmp_alpha, cmp_families, cmp_bins); });

    auto* dim = app.add_subcommand("dim", "numerical dimension diagnostics");
    add_graph_opts(dim, c, true);
    add_v_opts(dim, c);
    add_run_opts(dim, c);
    add_numeric_opts(dim, c);
    dim->add_option("--k-max", k_max, "number of subspace directions to probe")
        ->capture_default_str();
    dim->add_option("--cutoff", cutoff, "relative diagonal cutoff")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    dim->callback([&] { run_dim(c, k_max, cutoff); });

    auto* solve = app.add_subcommand("solve", "reference solvers");
    add_graph_opts(solve, c, true);
    add_v_opts(solve, c);
    add_run_opts(solve, c);
    add_numeric_opts(solve, c);
    solve->add_option("--method", method, "power | gs | series | block")
        ->check(CLI::IsMember({"power", "gs", "series", "block"}));
    solve->add_option("--kernel", solve_kernel, "kernel spec with a single value");
    solve->callback([&] { run_solve(c, method, solve_kernel); });

    auto* selftest = app.add_subcommand("selftest", "built-in consistency checks");
    add_run_opts(selftest, c);
    selftest->callback([&] { run_selftest(c); });

    try {
        for (int i = 1; i < argc; ++i) {
            const std::string_view a = argv[i];
            if (a == "--config" && i + 1 < argc)
                c.config = argv[i + 1];
            else if (a.rfind("--config=", 0) == 0)
                c.config = std::string(a.substr(9));
        }
        if (!c.config.empty()) apply_config(c.config, setters);
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace damprank::cli
