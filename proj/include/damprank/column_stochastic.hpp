#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "damprank/edge_graph.hpp"
#include "damprank/personalization.hpp"

namespace damprank {

enum class DanglingMode { error, patch_v, uniform, leave };

/// Row-access mirror of the link part, for solvers that sweep by rows.
struct RowMirror {
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col_idx;
    std::vector<double> values;
    std::vector<double> diag; // diagonal entries of the link part
};

/// The column-stochastic transition operator P. The pure link part (value
/// 1/n_j for each distinct out-neighbor of j) is stored compressed by column;
/// dangling columns are represented implicitly as a rank-one patch so that
/// multiply() behaves as if each dangling column were the patch distribution.
class ColumnStochastic {
public:
    static ColumnStochastic build(const EdgeGraph& g, DanglingMode mode,
                                  const PersonalizationVector* v = nullptr);

    std::size_t dimension() const { return n_; }
    DanglingMode dangling_mode() const { return mode_; }
    std::size_t dangling_count() const { return dangling_.size(); }
    std::uint64_t source_graph_hash() const { return hash_; }

    /// True when every column sums to 1 (dangling patched or absent).
    bool fully_stochastic() const {
        return dangling_.empty() || mode_ == DanglingMode::patch_v ||
               mode_ == DanglingMode::uniform;
    }

    /// y = P x. Sequential and deterministic.
    void multiply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> multiply(std::span<const double> x) const;

    // Link-part structure (excludes the dangling patch).
    std::span<const std::size_t> col_ptr() const { return col_ptr_; }
    std::span<const std::uint32_t> row_idx() const { return row_idx_; }
    std::span<const double> values() const { return values_; }
    std::span<const std::uint32_t> dangling_nodes() const { return dangling_; }

    /// Patch distribution applied to dangling columns; empty for leave/error.
    std::span<const double> patch() const { return patch_; }

    /// Effective column sum of the full operator (link + patch).
    double column_sum(std::size_t j) const;

    /// Built on first use, then shared.
    const RowMirror& row_mirror() const;

private:
    std::size_t n_ = 0;
    DanglingMode mode_ = DanglingMode::error;
    std::vector<std::size_t> col_ptr_;
    std::vector<std::uint32_t> row_idx_;
    std::vector<double> values_;
    std::vector<std::uint32_t> dangling_;
    std::vector<double> patch_;
    std::uint64_t hash_ = 0;
    mutable std::shared_ptr<RowMirror> mirror_;
    mutable std::shared_ptr<std::once_flag> mirror_once_ = std::make_shared<std::once_flag>();
};

} // namespace damprank
