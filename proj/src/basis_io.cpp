#include "damprank/basis_io.hpp"

#include "damprank/errors.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace damprank {

static_assert(std::endian::native == std::endian::little,
              "basis files are little-endian; this platform is not");

namespace {

constexpr char magic[8] = {'D', 'K', 'R', 'Y', 'L', 'O', 'V', '1'};

const char* mode_name(PersonalizationMode m) {
    return m == PersonalizationMode::nonnegative ? "nonnegative" : "signed";
}

PersonalizationMode mode_from(const std::string& s) {
    if (s == "nonnegative") return PersonalizationMode::nonnegative;
    if (s == "signed") return PersonalizationMode::signed_sum;
    throw data_error("basis sidecar: unknown personalization mode `" + s + "`");
}

} // namespace

void save_basis(const std::filesystem::path& path, const KrylovBasis& basis) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open " + path.string() + " for writing");

    out.write(magic, sizeof magic);
    const std::uint64_t n = basis.n, m = basis.m;
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&m), 8);
    out.write(reinterpret_cast<const char*>(&basis.sigma), 8);
    out.write(reinterpret_cast<const char*>(&basis.tol), 8);
    std::vector<double> row(basis.m);
    for (std::size_t i = 0; i < basis.m; ++i) {
        for (std::size_t j = 0; j < basis.m; ++j)
            row[j] = basis.H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(8 * basis.m));
    }
    for (const auto& col : basis.Q)
        out.write(reinterpret_cast<const char*>(col.data()),
                  static_cast<std::streamsize>(8 * basis.n));
    if (!out) throw data_error("write failed for " + path.string());
    out.close();

    nlohmann::json side;
    side["format"] = std::string(magic, sizeof magic);
    side["graph_hash"] = basis.graph_hash;
    side["v_seed"] = basis.v_seed;
    side["v_mode"] = mode_name(basis.v_mode);
    side["v_generated"] = basis.v_generated;
    side["v_l1"] = basis.v_l1;
    side["happy"] = basis.happy;
    side["residuals"] = basis.residuals;

    const auto side_path = path.string() + ".json";
    std::ofstream js(side_path, std::ios::trunc);
    if (!js) throw data_error("cannot open " + side_path + " for writing");
    js << side.dump(2) << '\n';
    if (!js) throw data_error("write failed for " + side_path);
}

KrylovBasis load_basis(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path.string());

    char head[8];
    in.read(head, 8);
    if (!in || std::memcmp(head, magic, 8) != 0)
        throw data_error(path.string() + " is not a basis file");

    KrylovBasis b;
    std::uint64_t n = 0, m = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&m), 8);
    in.read(reinterpret_cast<char*>(&b.sigma), 8);
    in.read(reinterpret_cast<char*>(&b.tol), 8);
    if (!in || n == 0 || m == 0 || m > n)
        throw data_error(path.string() + ": bad basis dimensions");
    b.n = n;
    b.m = m;

    std::error_code ec;
    const auto actual = std::filesystem::file_size(path, ec);
    const std::uint64_t expect = 8 + 32 + 8 * (m * m + n * m);
    if (ec || actual != expect)
        throw data_error(path.string() + ": truncated or oversized basis file");

    b.H.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<double> row(m);
    for (std::uint64_t i = 0; i < m; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(8 * m));
        for (std::uint64_t j = 0; j < m; ++j)
            b.H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    b.Q.assign(m, std::vector<double>(n));
    for (auto& col : b.Q)
        in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(8 * n));
    if (!in) throw data_error(path.string() + ": short read");

    const auto side_path = path.string() + ".json";
    std::ifstream js(side_path);
    if (!js) throw data_error("missing basis sidecar " + side_path);
    nlohmann::json side;
    try {
        js >> side;
        b.graph_hash = side.at("graph_hash").get<std::uint64_t>();
        b.v_seed = side.at("v_seed").get<std::uint64_t>();
        b.v_mode = mode_from(side.at("v_mode").get<std::string>());
        b.v_generated = side.at("v_generated").get<bool>();
        b.v_l1 = side.at("v_l1").get<double>();
        b.happy = side.at("happy").get<bool>();
        b.residuals = side.at("residuals").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(side_path + ": " + e.what());
    }
    if (b.residuals.size() != b.m)
        throw data_error(side_path + ": residual history does not match basis size");
    return b;
}

} // namespace damprank
