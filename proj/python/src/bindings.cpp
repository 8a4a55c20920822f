// Python bindings for the batch engine. The surface mirrors the CLI verbs:
// load or synthesize a graph, build a shared basis, then evaluate damping
// models against it. Vectors cross the boundary as plain lists of floats.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "damprank/analysis.hpp"
#include "damprank/basis_io.hpp"
#include "damprank/column_stochastic.hpp"
#include "damprank/edge_graph.hpp"
#include "damprank/fixtures.hpp"
#include "damprank/kernels.hpp"
#include "damprank/krylov.hpp"
#include "damprank/personalization.hpp"
#include "damprank/scc.hpp"
#include "damprank/solvers.hpp"

namespace py = pybind11;
using namespace damprank;

namespace {

DampingKernel kernel_from(const std::string& name, double nu) {
    if (name == "geometric") return DampingKernel::geometric();
    if (name == "poisson") return DampingKernel::poisson();
    if (name == "logarithmic" || name == "log") return DampingKernel::logarithmic();
    if (name == "cmp") return DampingKernel::cmp(nu);
    throw std::invalid_argument("unknown kernel family: " + name);
}

DanglingMode dangling_from(const std::string& s) {
    if (s == "error") return DanglingMode::error;
    if (s == "patch" || s == "patch_v") return DanglingMode::patch_v;
    if (s == "uniform") return DanglingMode::uniform;
    if (s == "leave") return DanglingMode::leave;
    throw std::invalid_argument("unknown dangling mode: " + s);
}

// pv is either a seed for the generator or an explicit vector
using PvArg = std::variant<std::uint64_t, std::vector<double>>;

PersonalizationVector make_pv(const EdgeGraph& g, const PvArg& pv, bool nonneg) {
    const auto mode = nonneg ? PersonalizationMode::nonnegative
                             : PersonalizationMode::signed_sum;
    if (std::holds_alternative<std::uint64_t>(pv))
        return gen_personalization(g.n, std::get<std::uint64_t>(pv), mode);
    return personalization_from_values(std::get<std::vector<double>>(pv), mode);
}

ColumnStochastic make_operator(const EdgeGraph& g, const PersonalizationVector& v,
                               const std::string& dangling) {
    return ColumnStochastic::build(g, dangling_from(dangling), &v);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "personalized damping-model rank engine";

    py::class_<EdgeGraph>(m, "Graph")
        .def_property_readonly("n", [](const EdgeGraph& g) { return g.n; })
        .def_property_readonly("edge_count", &EdgeGraph::edge_count)
        .def("label", &EdgeGraph::label, py::arg("node"))
        .def("__repr__", [](const EdgeGraph& g) {
            return "Graph(n=" + std::to_string(g.n) +
                   ", edges=" + std::to_string(g.edge_count()) + ")";
        });

    m.def(
        "load_graph",
        [](const std::string& path, const std::string& format) {
            if (format == "tsv") return parse_edge_list(path, EdgeFormat::tsv);
            if (format == "konect") return parse_edge_list(path, EdgeFormat::konect);
            throw std::invalid_argument("unknown edge format: " + format);
        },
        py::arg("path"), py::arg("format") = "tsv");
    m.def("random_graph", &random_graph, py::arg("n"), py::arg("mean_out_degree") = 8.0,
          py::arg("seed") = 1);
    m.def("cycle_graph", &cycle_graph, py::arg("n"));
    m.def("graph_hash", &graph_hash, py::arg("graph"));

    m.def(
        "scc_block_sizes",
        [](const EdgeGraph& g) { return scc_blocks(g).block_sizes(); },
        py::arg("graph"),
        "Strongly connected component sizes in dependency order, sources first.");

    py::class_<KrylovBasis>(m, "Basis")
        .def_property_readonly("n", [](const KrylovBasis& b) { return b.n; })
        .def_property_readonly("m", [](const KrylovBasis& b) { return b.m; })
        .def_property_readonly("sigma", [](const KrylovBasis& b) { return b.sigma; })
        .def_property_readonly("happy", [](const KrylovBasis& b) { return b.happy; })
        .def("save", [](const KrylovBasis& b, const std::string& path) { save_basis(path, b); },
             py::arg("path"))
        .def("__repr__", [](const KrylovBasis& b) {
            return "Basis(n=" + std::to_string(b.n) + ", m=" + std::to_string(b.m) +
                   (b.happy ? ", closed)" : ")");
        });

    m.def(
        "load_basis", [](const std::string& path) { return load_basis(path); },
        py::arg("path"));

    m.def(
        "build_basis",
        [](const EdgeGraph& g, const PvArg& pv, const std::string& dangling, double tol,
           std::size_t m_max) {
            auto v = make_pv(g, pv, true);
            return arnoldi_build(make_operator(g, v, dangling), v, tol, m_max);
        },
        py::arg("graph"), py::arg("pv") = std::uint64_t{0}, py::arg("dangling") = "patch",
        py::arg("tol") = 1e-14, py::arg("m_max") = 256,
        "Orthonormal walk subspace shared by every damping model on this graph "
        "and start vector.");

    m.def(
        "rank",
        [](const KrylovBasis& b, const std::string& kernel, double rho, double nu,
           double eps) {
            return lift(b, eval_series_coeffs(b, kernel_from(kernel, nu), rho, eps).coeffs);
        },
        py::arg("basis"), py::arg("kernel"), py::arg("rho"), py::arg("nu") = 0.0,
        py::arg("eps") = 1e-12,
        "Rank vector of the damping model at decay rate rho, lifted from the basis.");

    m.def(
        "rank_derivative",
        [](const KrylovBasis& b, const std::string& kernel, double rho, double nu,
           double eps) {
            return lift(b, eval_derivative_coeffs(b, kernel_from(kernel, nu), rho, eps).coeffs);
        },
        py::arg("basis"), py::arg("kernel"), py::arg("rho"), py::arg("nu") = 0.0,
        py::arg("eps") = 1e-12,
        "Elementwise sensitivity of the rank vector to the decay rate.");

    m.def(
        "gauss_seidel_rank",
        [](const EdgeGraph& g, double alpha, const PvArg& pv, const std::string& dangling,
           double tol) {
            auto v = make_pv(g, pv, true);
            auto r = gauss_seidel(make_operator(g, v, dangling), v, alpha, tol);
            if (!r.report.converged) throw std::runtime_error("solver did not converge");
            return r.x;
        },
        py::arg("graph"), py::arg("alpha"), py::arg("pv") = std::uint64_t{0},
        py::arg("dangling") = "patch", py::arg("tol") = 1e-12,
        "Geometric-damping rank solved iteratively in the ambient space.");

    m.def(
        "kl_divergence",
        [](const std::vector<double>& p, const std::vector<double>& q) {
            return kl_divergence(p, q);
        },
        py::arg("p"), py::arg("q"));

    m.def(
        "correspondence_solve",
        [](const std::string& kernel, double target_mean, double nu) {
            return correspondence_solve(kernel_from(kernel, nu), target_mean);
        },
        py::arg("kernel"), py::arg("target_mean"), py::arg("nu") = 0.0,
        "Decay rate at which the family's expected walk length equals target_mean.");

    m.def(
        "mean_steps",
        [](const std::string& kernel, double rho, double nu) {
            return kernel_from(kernel, nu).mean_steps(rho);
        },
        py::arg("kernel"), py::arg("rho"), py::arg("nu") = 0.0);

    m.def(
        "weight",
        [](const std::string& kernel, std::uint64_t k, double rho, double nu) {
            return kernel_from(kernel, nu).weight(k, rho);
        },
        py::arg("kernel"), py::arg("k"), py::arg("rho"), py::arg("nu") = 0.0,
        "Probability the model assigns to walk length k.");

    m.def(
        "tail_mass",
        [](const std::string& kernel, std::uint64_t K, double rho, double nu) {
            return kernel_from(kernel, nu).tail_mass(K, rho);
        },
        py::arg("kernel"), py::arg("K"), py::arg("rho"), py::arg("nu") = 0.0,
        "Probability mass on walk lengths strictly beyond K.");
}
