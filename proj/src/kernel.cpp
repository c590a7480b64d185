#include "sslab/kernel.hpp"

#include "sslab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sslab::kernel {

GridIndex::GridIndex(std::vector<std::span<const double>> columns, std::vector<double> cell)
    : cell_(std::move(cell)) {
    const std::size_t d = columns.size();
    if (d == 0 || d != cell_.size()) throw ArgumentError("grid index needs matching dimensions");
    const std::size_t n = columns[0].size();
    origin_.resize(d);
    extent_.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        if (columns[k].size() != n) throw ArgumentError("grid index columns differ in length");
        if (!(cell_[k] > 0.0)) throw ArgumentError("grid index cell width must be positive");
        const auto [mn, mx] = std::minmax_element(columns[k].begin(), columns[k].end());
        origin_[k] = n ? *mn : 0.0;
        const double span = n ? *mx - *mn : 0.0;
        extent_[k] = static_cast<std::int64_t>(std::floor(span / cell_[k])) + 1;
    }
    // Guard the linearized key against overflow by coarsening if needed.
    double total = 1.0;
    for (auto e : extent_) total *= static_cast<double>(e);
    if (total > 4e18) throw ArgumentError("grid index too fine for its range");

    std::vector<std::int64_t> keys(n);
    std::vector<std::int64_t> pos(d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < d; ++k) {
            auto c = static_cast<std::int64_t>(std::floor((columns[k][r] - origin_[k]) / cell_[k]));
            pos[k] = std::min<std::int64_t>(std::max<std::int64_t>(c, 0), extent_[k] - 1);
        }
        keys[r] = key(pos);
    }
    rows_.resize(n);
    std::iota(rows_.begin(), rows_.end(), 0u);
    std::stable_sort(rows_.begin(), rows_.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    std::uint32_t begin = 0;
    for (std::uint32_t r = 1; r <= n; ++r) {
        if (r == n || keys[rows_[r]] != keys[rows_[begin]]) {
            ranges_.emplace(keys[rows_[begin]], std::make_pair(begin, r));
            begin = r;
        }
    }
}

std::int64_t GridIndex::key(const std::vector<std::int64_t>& cellpos) const {
    std::int64_t k = 0;
    for (std::size_t d = cellpos.size(); d-- > 0;) k = k * extent_[d] + cellpos[d];
    return k;
}

} // namespace sslab::kernel
