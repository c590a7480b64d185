#pragma once

#include <algorithm>
#include <cmath>

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace sslab::kernel {

// Biweight (quartic) kernel scaled so that K(0) = 1; used for weights.
inline double biweight_weight(double u) {
    if (u <= -1.0 || u >= 1.0) return 0.0;
    const double t = 1.0 - u * u;
    return t * t;
}

// Biweight density, integrates to one on [-1, 1].
inline double biweight_density(double u) { return 0.9375 * biweight_weight(u); }

// Integral of biweight_density from -1 to u.
inline double biweight_cdf(double u) {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double u2 = u * u;
    return 0.5 + 0.9375 * u * (1.0 - u2 * (2.0 / 3.0) + u2 * u2 * 0.2);
}

// Uniform-cell bucketing of rows in d dimensions so that the rows inside a
// box [center - radius, center + radius] can be visited without a full scan.
class GridIndex {
public:
    GridIndex() = default;
    // columns[k] holds coordinate k for every row; cell[k] > 0 is the cell width.
    GridIndex(std::vector<std::span<const double>> columns, std::vector<double> cell);

    std::size_t dims() const { return cell_.size(); }

    // Calls visit(row) for every row in a cell that intersects the box. Rows
    // outside the box may be visited; callers apply their own kernel cut.
    template <class Visit>
    void for_each_candidate(std::span<const double> center, std::span<const double> radius,
                            Visit&& visit) const;

private:
    std::int64_t key(const std::vector<std::int64_t>& cellpos) const;

    std::vector<double> origin_;
    std::vector<double> cell_;
    std::vector<std::int64_t> extent_; // number of cells per dimension
    std::vector<std::uint32_t> rows_;  // rows sorted by cell key
    std::unordered_map<std::int64_t, std::pair<std::uint32_t, std::uint32_t>> ranges_;
};

template <class Visit>
void GridIndex::for_each_candidate(std::span<const double> center, std::span<const double> radius,
                                   Visit&& visit) const {
    const std::size_t d = cell_.size();
    std::vector<std::int64_t> lo(d), hi(d), pos(d);
    for (std::size_t k = 0; k < d; ++k) {
        auto clamp_cell = [&](double v) {
            auto c = static_cast<std::int64_t>(std::floor((v - origin_[k]) / cell_[k]));
            return std::min<std::int64_t>(std::max<std::int64_t>(c, 0), extent_[k] - 1);
        };
        const double a = center[k] - radius[k];
        const double b = center[k] + radius[k];
        if (b < origin_[k] || a > origin_[k] + cell_[k] * static_cast<double>(extent_[k])) return;
        lo[k] = clamp_cell(a);
        hi[k] = clamp_cell(b);
        pos[k] = lo[k];
    }
    while (true) {
        const auto it = ranges_.find(key(pos));
        if (it != ranges_.end())
            for (std::uint32_t r = it->second.first; r < it->second.second; ++r) visit(rows_[r]);
        std::size_t k = 0;
        while (k < d) {
            if (++pos[k] <= hi[k]) break;
            pos[k] = lo[k];
            ++k;
        }
        if (k == d) break;
    }
}

} // namespace sslab::kernel
