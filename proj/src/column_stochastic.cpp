#include "damprank/column_stochastic.hpp"

#include "damprank/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace damprank {

ColumnStochastic ColumnStochastic::build(const EdgeGraph& g, DanglingMode mode,
                                         const PersonalizationVector* v) {
    if (g.n == 0) throw std::invalid_argument("ColumnStochastic: graph has no nodes");
    if (g.n > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument("ColumnStochastic: node count exceeds 32-bit ids");

    ColumnStochastic P;
    P.n_ = g.n;
    P.mode_ = mode;
    P.hash_ = graph_hash(g);

    // Bucket destinations by source column, then dedupe per column.
    std::vector<std::size_t> cnt(P.n_ + 1, 0);
    for (const auto& [s, d] : g.edges) {
        if (s >= P.n_ || d >= P.n_)
            throw std::invalid_argument("ColumnStochastic: edge endpoint out of range");
        ++cnt[s + 1];
    }
    std::partial_sum(cnt.begin(), cnt.end(), cnt.begin());
    std::vector<std::uint32_t> bucket(g.edges.size());
    {
        std::vector<std::size_t> cursor(cnt.begin(), cnt.end() - 1);
        for (const auto& [s, d] : g.edges) bucket[cursor[s]++] = d;
    }

    P.col_ptr_.assign(P.n_ + 1, 0);
    P.row_idx_.reserve(g.edges.size());
    for (std::size_t j = 0; j < P.n_; ++j) {
        auto first = bucket.begin() + static_cast<std::ptrdiff_t>(cnt[j]);
        auto last = bucket.begin() + static_cast<std::ptrdiff_t>(cnt[j + 1]);
        std::sort(first, last);
        auto stop = std::unique(first, last);
        P.row_idx_.insert(P.row_idx_.end(), first, stop);
        P.col_ptr_[j + 1] = P.row_idx_.size();
        if (first == stop) P.dangling_.push_back(static_cast<std::uint32_t>(j));
    }
    P.values_.resize(P.row_idx_.size());
    for (std::size_t j = 0; j < P.n_; ++j) {
        const std::size_t deg = P.col_ptr_[j + 1] - P.col_ptr_[j];
        if (deg == 0) continue;
        const double w = 1.0 / static_cast<double>(deg);
        std::fill(P.values_.begin() + static_cast<std::ptrdiff_t>(P.col_ptr_[j]),
                  P.values_.begin() + static_cast<std::ptrdiff_t>(P.col_ptr_[j + 1]), w);
    }

    switch (mode) {
    case DanglingMode::error:
        if (!P.dangling_.empty())
            throw data_error("graph has " + std::to_string(P.dangling_.size()) +
                             " dangling node(s), first: " + g.label(P.dangling_.front()));
        break;
    case DanglingMode::patch_v:
        if (v == nullptr)
            throw std::invalid_argument("dangling mode patch_v needs a personalization vector");
        if (v->size() != P.n_)
            throw std::invalid_argument("patch vector length does not match graph");
        if (!v->nonnegative())
            throw std::invalid_argument("patch vector must be a distribution (nonnegative mode)");
        P.patch_.assign(v->v.begin(), v->v.end());
        break;
    case DanglingMode::uniform:
        P.patch_.assign(P.n_, 1.0 / static_cast<double>(P.n_));
        break;
    case DanglingMode::leave:
        break;
    }
    return P;
}

void ColumnStochastic::multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != n_ || y.size() != n_)
        throw std::invalid_argument("multiply: vector length does not match operator");
    if (x.data() == y.data())
        throw std::invalid_argument("multiply: input and output must not alias");

    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p)
            y[row_idx_[p]] += values_[p] * xj;
    }
    if (!dangling_.empty() && !patch_.empty()) {
        double mass = 0.0;
        for (std::uint32_t j : dangling_) mass += x[j];
        if (mass != 0.0)
            for (std::size_t i = 0; i < n_; ++i) y[i] += mass * patch_[i];
    }
}

std::vector<double> ColumnStochastic::multiply(std::span<const double> x) const {
    std::vector<double> y(n_);
    multiply(x, y);
    return y;
}

double ColumnStochastic::column_sum(std::size_t j) const {
    if (j >= n_) throw std::invalid_argument("column_sum: index out of range");
    if (col_ptr_[j] == col_ptr_[j + 1]) {
        if (patch_.empty()) return 0.0;
        double s = 0.0;
        for (double p : patch_) s += p;
        return s;
    }
    double s = 0.0;
    for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) s += values_[p];
    return s;
}

const RowMirror& ColumnStochastic::row_mirror() const {
    std::call_once(*mirror_once_, [this] {
        auto m = std::make_shared<RowMirror>();
        m->row_ptr.assign(n_ + 1, 0);
        for (std::uint32_t i : row_idx_) ++m->row_ptr[i + 1];
        std::partial_sum(m->row_ptr.begin(), m->row_ptr.end(), m->row_ptr.begin());
        m->col_idx.resize(row_idx_.size());
        m->values.resize(row_idx_.size());
        m->diag.assign(n_, 0.0);
        std::vector<std::size_t> cursor(m->row_ptr.begin(), m->row_ptr.end() - 1);
        for (std::size_t j = 0; j < n_; ++j) {
            for (std::size_t p = col_ptr_[j]; p < col_ptr_[j + 1]; ++p) {
                const std::uint32_t i = row_idx_[p];
                const std::size_t q = cursor[i]++;
                m->col_idx[q] = static_cast<std::uint32_t>(j);
                m->values[q] = values_[p];
                if (i == j) m->diag[i] = values_[p];
            }
        }
        mirror_ = std::move(m);
    });
    return *mirror_;
}

} // namespace damprank
