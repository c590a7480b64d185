#include "sslab/estimator.hpp"

#include "sslab/fd.hpp"
#include "sslab/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace sslab {

namespace {

std::span<const double> column_by_name(const SimulatedDataset& d, const std::string& name,
                                       Vec& scratch) {
    auto as_span = [&](const Eigen::Ref<const Vec>& v) {
        scratch = v;
        return std::span<const double>(scratch.data(), static_cast<std::size_t>(scratch.size()));
    };
    if (name == "x") return {d.x.data(), d.size()};
    if (name == "v") {
        if (!d.v_hat) throw StateError("dataset has no control residuals (v_hat)");
        return {d.v_hat->data(), d.size()};
    }
    if (name.size() >= 2) {
        const char kind = name[0];
        const int k = std::stoi(name.substr(1));
        if (kind == 'p' && k >= 1 && k <= d.p.cols()) return as_span(d.p.col(k - 1));
        if (kind == 'q' && k >= 1 && k <= d.q.cols()) return as_span(d.q.col(k - 1));
        if (kind == 'y' && k >= 1 && k <= d.y.cols()) return as_span(d.y.col(k - 1));
    }
    throw ArgumentError("unknown coordinate '" + name + "'");
}

double sd_of(std::span<const double> v) {
    const auto n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double t : v) mean += t;
    mean /= n;
    double ss = 0.0;
    for (double t : v) ss += (t - mean) * (t - mean);
    return v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

bool equally_spaced(const std::vector<double>& g) {
    if (g.size() < 3) return false;
    const double step = (g.back() - g.front()) / static_cast<double>(g.size() - 1);
    for (std::size_t k = 1; k < g.size(); ++k)
        if (std::abs(g[k] - g[k - 1] - step) > 1e-9 * std::max(1.0, std::abs(step))) return false;
    return true;
}

std::string describe(const ContextPoint& w) {
    std::string s = "w=(p=(";
    for (Eigen::Index k = 0; k < w.p.size(); ++k)
        s += (k ? "," : "") + format_double(w.p[k]);
    s += "), x=" + format_double(w.x);
    if (w.v) s += ", v=" + format_double(*w.v);
    return s + ")";
}

} // namespace

// ------------------------------------------------------------ bandwidths

double BandwidthProfile::at(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return h[k];
    throw ArgumentError("bandwidth profile has no coordinate '" + name + "'");
}

void BandwidthProfile::validate() const {
    if (names.size() != h.size()) throw ArgumentError("bandwidth profile sizes differ");
    for (std::size_t k = 0; k < h.size(); ++k)
        if (!(h[k] > 0.0) || !std::isfinite(h[k]))
            throw ArgumentError("bandwidth for '" + names[k] + "' must be positive");
    if (!(outcome > 0.0) || !std::isfinite(outcome))
        throw ArgumentError("outcome bandwidth must be positive");
}

BandwidthProfile select_bandwidths(const SimulatedDataset& data,
                                   const std::vector<std::string>& coordinates,
                                   GoodIndex outcome_good) {
    const std::size_t n = data.size();
    if (n == 0) throw ArgumentError("bandwidth selection needs a nonempty dataset");
    outcome_good.check(data.num_inside_goods());
    const double d = static_cast<double>(coordinates.size());
    const double nn = static_cast<double>(n);
    BandwidthProfile bw;
    Vec scratch;
    for (const auto& name : coordinates) {
        const double sd = sd_of(column_by_name(data, name, scratch));
        if (!(sd > 0.0)) throw DegeneracyError("coordinate '" + name + "' has zero variance");
        bw.names.push_back(name);
        bw.h.push_back(1.06 * sd * std::pow(nn, -1.0 / (4.0 + d)));
    }
    const std::string y_name = "y" + std::to_string(outcome_good.value());
    const double sd_y = sd_of(column_by_name(data, y_name, scratch));
    if (!(sd_y > 0.0)) throw DegeneracyError("outcome '" + y_name + "' has zero variance");
    bw.outcome = 1.06 * sd_y * std::pow(nn, -1.0 / (5.0 + d));
    return bw;
}

std::vector<std::string> context_coordinates(const SimulatedDataset& data, bool use_control) {
    std::vector<std::string> out;
    for (int k = 1; k <= data.num_inside_goods(); ++k) out.push_back("p" + std::to_string(k));
    out.push_back("x");
    Vec scratch;
    for (int k = 1; k <= data.num_characteristics(); ++k) {
        const std::string name = "q" + std::to_string(k);
        if (sd_of(column_by_name(data, name, scratch)) > 0.0) out.push_back(name);
    }
    if (use_control && data.v_hat) out.push_back("v");
    return out;
}

// ---------------------------------------------------------------- curves

void CurveOnGrid::validate() const {
    if (grid.size() != values.size()) throw ArgumentError("curve grid and values differ in length");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw ArgumentError("curve grid must be strictly increasing");
}

CurveOnGrid monotone_rearrange(CurveOnGrid curve) {
    curve.validate();
    std::sort(curve.values.begin(), curve.values.end());
    for (double& v : curve.values) v = std::clamp(v, 0.0, 1.0);
    return curve;
}

double invert_cdf(const CurveOnGrid& curve, double level) {
    curve.validate();
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0,1)");
    const auto& v = curve.values;
    if (v.empty() || level < v.front() || level > v.back())
        throw DomainError("level " + format_double(level) + " outside the curve range [" +
                          (v.empty() ? std::string("empty") : format_double(v.front()) + ", " +
                                                                  format_double(v.back())) +
                          "]");
    const auto it = std::lower_bound(v.begin(), v.end(), level);
    const auto k = static_cast<std::size_t>(it - v.begin());
    if (k == 0 || v[k] == level) return curve.grid[k];
    const double t = (level - v[k - 1]) / (v[k] - v[k - 1]);
    return curve.grid[k - 1] + t * (curve.grid[k] - curve.grid[k - 1]);
}

// ------------------------------------------------------- KernelEstimator

KernelEstimator::KernelEstimator(std::shared_ptr<const SimulatedDataset> data,
                                 std::vector<std::string> coordinates, EstimatorOptions options,
                                 std::shared_ptr<const std::vector<double>> frequencies)
    : data_(std::move(data)), coords_(std::move(coordinates)), options_(options),
      freq_(std::move(frequencies)) {
    if (!data_ || data_->size() == 0) throw ArgumentError("estimator needs a nonempty dataset");
    if (coords_.empty()) throw ArgumentError("estimator needs at least one context coordinate");
    if (options_.grid_points < 3) throw ArgumentError("outcome grid needs at least 3 points");
    const std::size_t n = data_->size();
    if (freq_ && freq_->size() != n) throw ArgumentError("one frequency weight per row required");
    const std::size_t d = coords_.size();
    auto layout = std::make_shared<Layout>();
    static std::atomic<std::uint64_t> next_layout_id{1};
    layout->id = next_layout_id.fetch_add(1);
    layout->columns.resize(n * d);
    std::vector<double> cell(d);
    std::vector<std::vector<double>> cols(d);
    Vec scratch;
    for (std::size_t k = 0; k < d; ++k) {
        const auto c = column_by_name(*data_, coords_[k], scratch);
        cols[k].assign(c.begin(), c.end());
        for (std::size_t r = 0; r < n; ++r) layout->columns[r * d + k] = c[r];
        const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
        const double span = *mx - *mn;
        cell[k] = span > 0.0 ? span / 12.0 : 1.0;
    }
    std::vector<std::span<const double>> spans;
    for (const auto& c : cols) spans.emplace_back(c.data(), c.size());
    layout->index = kernel::GridIndex(spans, cell);
    layout_ = std::move(layout);
}

KernelEstimator KernelEstimator::with_frequencies(
    std::shared_ptr<const std::vector<double>> frequencies) const {
    if (frequencies && frequencies->size() != data_->size())
        throw ArgumentError("one frequency weight per row required");
    KernelEstimator out = *this;
    out.freq_ = std::move(frequencies);
    return out;
}

double KernelEstimator::context_value(const ContextPoint& w, std::size_t k) const {
    const std::string& name = coords_[k];
    if (name == "x") return w.x;
    if (name == "v") {
        if (!w.v) throw ArgumentError("context point lacks the control value v");
        return *w.v;
    }
    const int idx = std::stoi(name.substr(1)) - 1;
    if (name[0] == 'p') {
        if (idx >= w.p.size()) throw ArgumentError("context point lacks " + name);
        return w.p[idx];
    }
    if (idx >= w.q.size()) throw ArgumentError("context point lacks " + name);
    return w.q[idx];
}

namespace {

// Small per-thread memo of context kernel products. A residual evaluation
// revisits the same few shifted contexts many times.
struct ContextCacheEntry {
    std::uint64_t layout = 0;
    std::vector<double> key; // center then bandwidths
    std::shared_ptr<const KernelEstimator::ContextKernel> value;
};

constexpr std::size_t kContextCacheSize = 96;

} // namespace

std::shared_ptr<const KernelEstimator::ContextKernel>
KernelEstimator::context_kernel(const std::vector<double>& center,
                                const std::vector<double>& h) const {
    const std::size_t d = coords_.size();
    thread_local std::vector<ContextCacheEntry> cache;
    std::vector<double> key(center);
    key.insert(key.end(), h.begin(), h.begin() + static_cast<std::ptrdiff_t>(d));
    for (std::size_t e = 0; e < cache.size(); ++e) {
        if (cache[e].layout == layout_->id && cache[e].key == key) {
            auto hit = cache[e].value;
            std::rotate(cache.begin(), cache.begin() + static_cast<std::ptrdiff_t>(e),
                        cache.begin() + static_cast<std::ptrdiff_t>(e) + 1);
            return hit;
        }
    }
    std::vector<double> radius(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(d)), inv(d);
    for (std::size_t k = 0; k < d; ++k) inv[k] = 1.0 / h[k];
    auto out = std::make_shared<ContextKernel>();
    layout_->index.for_each_candidate(center, radius, [&](std::uint32_t r) {
        const double* row = &layout_->columns[static_cast<std::size_t>(r) * d];
        double k = 1.0;
        for (std::size_t c = 0; c < d && k > 0.0; ++c)
            k *= kernel::biweight_weight((row[c] - center[c]) * inv[c]);
        if (k <= 0.0) return;
        out->rows.push_back(r);
        out->k.push_back(k);
    });
    out->y.resize(static_cast<std::size_t>(data_->num_inside_goods()));
    for (std::size_t g = 0; g < out->y.size(); ++g) {
        out->y[g].reserve(out->rows.size());
        for (std::uint32_t r : out->rows) out->y[g].push_back(data_->y(r, static_cast<Eigen::Index>(g)));
    }
    cache.insert(cache.begin(), ContextCacheEntry{layout_->id, std::move(key), out});
    if (cache.size() > kContextCacheSize) cache.pop_back();
    return out;
}

KernelEstimator::Weights KernelEstimator::weights(const ContextPoint& w, GoodIndex i,
                                                  std::optional<Conditioning> cond,
                                                  const BandwidthProfile& bw) const {
    const std::size_t d = coords_.size();
    i.check(data_->num_inside_goods());
    if (bw.names.size() != d + (cond ? 1 : 0))
        throw ArgumentError("bandwidth profile does not match the conditioning coordinates");
    for (std::size_t k = 0; k < d; ++k)
        if (bw.names[k] != coords_[k])
            throw ArgumentError("bandwidth profile coordinate '" + bw.names[k] + "' != '" +
                                coords_[k] + "'");
    std::vector<double> center(d);
    for (std::size_t k = 0; k < d; ++k) center[k] = context_value(w, k);
    int cj = -1;
    double cy = 0.0, cinv = 0.0;
    if (cond) {
        cond->j.check(data_->num_inside_goods());
        if (cond->j == i) throw ArgumentError("conditioning good must differ from the outcome good");
        const std::string expect = "y" + std::to_string(cond->j.value());
        if (bw.names[d] != expect)
            throw ArgumentError("bandwidth profile lacks the conditioning coordinate " + expect);
        cj = cond->j.zero_based();
        cy = cond->y_j;
        cinv = 1.0 / bw.h[d];
    }
    const auto ctx = context_kernel(center, bw.h);
    const std::vector<double>& yi = ctx->y[static_cast<std::size_t>(i.zero_based())];
    const double* yc = cj >= 0 ? ctx->y[static_cast<std::size_t>(cj)].data() : nullptr;
    const double* fr = freq_ ? freq_->data() : nullptr;
    const std::uint32_t* rows = ctx->rows.data();
    const std::size_t m = ctx->rows.size();
    Weights out;
    double max_w = 0.0;
    if (!yc) {
        // Rows with zero frequency stay in with zero weight; skipping them
        // costs more in branch misses than the extra terms do.
        out.y = yi;
        out.w.resize(m);
        for (std::size_t idx = 0; idx < m; ++idx) {
            const double f = fr ? fr[rows[idx]] : 1.0;
            const double k = ctx->k[idx] * f;
            out.w[idx] = k;
            out.total += k;
            max_w = std::max(max_w, f > 0.0 ? ctx->k[idx] : 0.0);
        }
    } else {
        for (std::size_t idx = 0; idx < m; ++idx) {
            const double kc = ctx->k[idx] * kernel::biweight_weight((yc[idx] - cy) * cinv);
            if (kc <= 0.0) continue;
            const double f = fr ? fr[rows[idx]] : 1.0;
            if (f == 0.0) continue;
            const double k = kc * f;
            out.y.push_back(yi[idx]);
            out.w.push_back(k);
            out.total += k;
            max_w = std::max(max_w, kc);
        }
    }
    // Effective sample: total weight over the largest single-row kernel weight.
    const double effective = max_w > 0.0 ? out.total / max_w : 0.0;
    if (!(effective >= options_.min_effective))
        throw SparseRegionError("sparse region at " + describe(w) +
                                (cond ? ", y" + std::to_string(cond->j.value()) + "=" +
                                            format_double(cond->y_j)
                                      : std::string()) +
                                ": effective sample " + format_double(effective) + " < " +
                                format_double(options_.min_effective));
    return out;
}

std::vector<double> KernelEstimator::default_grid(GoodIndex i) const {
    i.check(data_->num_inside_goods());
    const auto col = data_->y.col(i.zero_based());
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    const double pad = std::max(options_.grid_expansion * (hi - lo), 1e-6 * std::max(1.0, std::abs(hi)));
    const int m = options_.grid_points;
    std::vector<double> g(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) g[static_cast<std::size_t>(k)] = (lo - pad) + (hi - lo + 2 * pad) * k / (m - 1);
    return g;
}

CurveOnGrid KernelEstimator::cdf_curve(const ContextPoint& w, GoodIndex i,
                                       std::optional<Conditioning> cond,
                                       const std::vector<double>& grid,
                                       const BandwidthProfile& bw) const {
    const Weights wt = weights(w, i, cond, bw);
    CurveOnGrid curve{grid, std::vector<double>(grid.size(), 0.0)};
    curve.validate();
    const double hy = bw.outcome;
    const std::size_t m = grid.size();

    if (!equally_spaced(grid)) {
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t t = 0; t < wt.y.size(); ++t)
                s += wt.w[t] * kernel::biweight_cdf((grid[k] - wt.y[t]) / hy);
            curve.values[k] = s / wt.total;
        }
        return curve;
    }

    // Linear binning of the weighted outcomes onto the grid, then a discrete
    // convolution with the integrated kernel.
    const double step = (grid.back() - grid.front()) / static_cast<double>(m - 1);
    std::vector<double> mass(m, 0.0);
    std::vector<double> outside_y, outside_w;
    for (std::size_t t = 0; t < wt.y.size(); ++t) {
        const double pos = (wt.y[t] - grid.front()) / step;
        if (pos < 0.0 || pos > static_cast<double>(m - 1)) {
            outside_y.push_back(wt.y[t]);
            outside_w.push_back(wt.w[t]);
            continue;
        }
        const auto l = std::min(static_cast<std::size_t>(pos), m - 2);
        const double frac = pos - static_cast<double>(l);
        mass[l] += wt.w[t] * (1.0 - frac);
        mass[l + 1] += wt.w[t] * frac;
    }
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(hy / step));
    std::vector<double> table(static_cast<std::size_t>(2 * reach + 1));
    for (std::ptrdiff_t o = -reach; o <= reach; ++o)
        table[static_cast<std::size_t>(o + reach)] =
            kernel::biweight_cdf(static_cast<double>(o) * step / hy);
    std::vector<double> prefix(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] + mass[k];
    const auto mm = static_cast<std::ptrdiff_t>(m);
    for (std::ptrdiff_t k = 0; k < mm; ++k) {
        // Grid points g with k - g > reach contribute their full mass.
        const std::ptrdiff_t full_end = std::clamp<std::ptrdiff_t>(k - reach, 0, mm);
        double s = prefix[static_cast<std::size_t>(full_end)];
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(k - reach, 0);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(k + reach, mm - 1);
        for (std::ptrdiff_t g = lo; g <= hi; ++g) {
            if (g < full_end) continue;
            s += mass[static_cast<std::size_t>(g)] * table[static_cast<std::size_t>(k - g + reach)];
        }
        for (std::size_t t = 0; t < outside_y.size(); ++t)
            s += outside_w[t] *
                 kernel::biweight_cdf((grid[static_cast<std::size_t>(k)] - outside_y[t]) / hy);
        curve.values[static_cast<std::size_t>(k)] = s / wt.total;
    }
    return curve;
}

double KernelEstimator::cdf_at(const ContextPoint& w, GoodIndex i, std::optional<Conditioning> cond,
                               double y, const BandwidthProfile& bw) const {
    const Weights wt = weights(w, i, cond, bw);
    double s = 0.0;
    for (std::size_t t = 0; t < wt.y.size(); ++t)
        s += wt.w[t] * kernel::biweight_cdf((y - wt.y[t]) / bw.outcome);
    return s / wt.total;
}

DensityEstimate KernelEstimator::density_at(const ContextPoint& w, GoodIndex i,
                                            std::optional<Conditioning> cond, double y,
                                            const BandwidthProfile& bw) const {
    const Weights wt = weights(w, i, cond, bw);
    double s = 0.0;
    for (std::size_t t = 0; t < wt.y.size(); ++t)
        s += wt.w[t] * kernel::biweight_density((y - wt.y[t]) / bw.outcome);
    DensityEstimate out;
    out.raw = s / (wt.total * bw.outcome);
    out.floored = out.raw < options_.density_floor;
    out.value = out.floored ? options_.density_floor : out.raw;
    return out;
}

namespace {

std::shared_ptr<const SimulatedDataset> borrow(const SimulatedDataset& data) {
    return std::shared_ptr<const SimulatedDataset>(&data, [](const SimulatedDataset*) {});
}

std::vector<std::string> names_without_conditioning(const BandwidthProfile& bw,
                                                    bool conditioned) {
    std::vector<std::string> out(bw.names.begin(), bw.names.end() - (conditioned ? 1 : 0));
    return out;
}

} // namespace

CurveOnGrid estimate_conditional_cdf(const SimulatedDataset& data, const ContextPoint& w,
                                     GoodIndex i,
                                     std::optional<KernelEstimator::Conditioning> cond,
                                     const std::vector<double>& grid, const BandwidthProfile& bw,
                                     const EstimatorOptions& options) {
    bw.validate();
    const KernelEstimator est(borrow(data), names_without_conditioning(bw, cond.has_value()),
                              options);
    return est.cdf_curve(w, i, cond, grid, bw);
}

DensityEstimate estimate_conditional_density(const SimulatedDataset& data, const ContextPoint& w,
                                             GoodIndex i,
                                             std::optional<KernelEstimator::Conditioning> cond,
                                             double y, const BandwidthProfile& bw,
                                             const EstimatorOptions& options) {
    bw.validate();
    const KernelEstimator est(borrow(data), names_without_conditioning(bw, cond.has_value()),
                              options);
    return est.density_at(w, i, cond, y, bw);
}

// -------------------------------------------------------- KernelProvider

KernelCalibration calibrate(const SimulatedDataset& data, const KernelProviderSettings& settings) {
    if (!(settings.bandwidth_scale > 0.0) || !(settings.outcome_scale > 0.0))
        throw ArgumentError("bandwidth scales must be positive");
    if (!(settings.fd_fraction > 0.0)) throw ArgumentError("fd_fraction must be positive");
    KernelCalibration cal;
    cal.coordinates = context_coordinates(data, settings.use_control);
    const int goods = data.num_inside_goods();
    auto finish = [&](BandwidthProfile bw) {
        for (std::size_t k = 0; k < bw.names.size(); ++k) {
            bw.h[k] *= settings.bandwidth_scale;
            if (const auto it = settings.overrides.find(bw.names[k]); it != settings.overrides.end())
                bw.h[k] = it->second;
        }
        bw.outcome *= settings.outcome_scale;
        if (const auto it = settings.overrides.find("outcome"); it != settings.overrides.end())
            bw.outcome = it->second;
        bw.validate();
        return bw;
    };
    for (const auto& [name, value] : settings.overrides) {
        (void)value;
        bool known = name == "outcome";
        for (const auto& c : cal.coordinates) known = known || c == name;
        for (int k = 1; k <= goods; ++k) known = known || name == "y" + std::to_string(k);
        if (!known) throw ArgumentError("bandwidth override for unknown coordinate '" + name + "'");
    }
    const KernelEstimator probe(borrow(data), cal.coordinates, settings.estimator);
    cal.conditional.resize(static_cast<std::size_t>(goods));
    for (int i = 1; i <= goods; ++i) {
        cal.marginal.push_back(finish(select_bandwidths(data, cal.coordinates, GoodIndex(i))));
        cal.conditional[static_cast<std::size_t>(i - 1)].resize(static_cast<std::size_t>(goods));
        for (int j = 1; j <= goods; ++j) {
            if (j == i) continue;
            auto names = cal.coordinates;
            names.push_back("y" + std::to_string(j));
            cal.conditional[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] =
                finish(select_bandwidths(data, names, GoodIndex(i)));
        }
        cal.grids.push_back(probe.default_grid(GoodIndex(i)));
    }
    return cal;
}

KernelProvider::KernelProvider(std::shared_ptr<const SimulatedDataset> data,
                               KernelProviderSettings settings,
                               std::shared_ptr<const KernelCalibration> calibration,
                               std::shared_ptr<const std::vector<double>> frequencies)
    : settings_(std::move(settings)),
      cal_(calibration ? std::move(calibration)
                       : std::make_shared<const KernelCalibration>(calibrate(*data, settings_))),
      est_(data, cal_->coordinates, settings_.estimator, std::move(frequencies)) {}

KernelProvider::KernelProvider(KernelProviderSettings settings,
                               std::shared_ptr<const KernelCalibration> cal, KernelEstimator est)
    : settings_(std::move(settings)), cal_(std::move(cal)), est_(std::move(est)) {}

KernelProvider KernelProvider::resampled(
    std::shared_ptr<const std::vector<double>> frequencies) const {
    return KernelProvider(settings_, cal_, est_.with_frequencies(std::move(frequencies)));
}

const BandwidthProfile& KernelProvider::profile(GoodIndex i, std::optional<GoodIndex> j) const {
    i.check(num_inside_goods());
    if (!j) return cal_->marginal[static_cast<std::size_t>(i.zero_based())];
    j->check(num_inside_goods());
    if (*j == i) throw ArgumentError("conditional objects need i != j");
    return cal_->conditional[static_cast<std::size_t>(i.zero_based())]
                            [static_cast<std::size_t>(j->zero_based())];
}

double KernelProvider::marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const {
    return est_.cdf_at(w, i, std::nullopt, y, profile(i, std::nullopt));
}

double KernelProvider::marginal_quantile(const ContextPoint& w, GoodIndex i, double level) const {
    const auto curve = monotone_rearrange(
        est_.cdf_curve(w, i, std::nullopt, cal_->grids[static_cast<std::size_t>(i.zero_based())],
                       profile(i, std::nullopt)));
    return invert_cdf(curve, level);
}

double KernelProvider::conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                                       double y_i) const {
    return est_.cdf_at(w, i, KernelEstimator::Conditioning{j, y_j}, y_i, profile(i, j));
}

double KernelProvider::conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                           double y_j, double y_i) const {
    const DensityEstimate f =
        est_.density_at(w, i, KernelEstimator::Conditioning{j, y_j}, y_i, profile(i, j));
    if (f.floored)
        throw DegeneracyError("estimated conditional density " + format_double(f.raw) +
                              " below floor " + format_double(density_floor()) + " at " +
                              describe(w));
    return f.value;
}

double KernelProvider::conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                            double y_j, double level) const {
    const auto curve = monotone_rearrange(
        est_.cdf_curve(w, i, KernelEstimator::Conditioning{j, y_j},
                       cal_->grids[static_cast<std::size_t>(i.zero_based())], profile(i, j)));
    return invert_cdf(curve, level);
}

FdScheme KernelProvider::fd_scheme(Coordinate c) const {
    const int goods = num_inside_goods();
    // Context bandwidths are the same in every conditional profile; use the
    // one for the (1, 2) pair.
    const BandwidthProfile& bw = profile(GoodIndex(1), GoodIndex(goods >= 2 ? 2 : 1));
    double h = 0.0;
    switch (c.kind) {
    case Coordinate::Kind::Price:
        h = bw.at("p" + std::to_string(c.good));
        break;
    case Coordinate::Kind::Income:
        h = bw.at("x");
        break;
    case Coordinate::Kind::ConditioningValue:
        if (c.good >= 1) {
            const GoodIndex other(c.good == 1 ? 2 : 1);
            h = profile(other, GoodIndex(c.good)).h.back();
        } else {
            h = bw.h.back();
        }
        break;
    }
    return FdScheme{settings_.fd_fraction * h, false, false};
}

// ------------------------------------------------------- estimate_partial

double evaluate_target(const QuantileProvider& provider, const ContextPoint& w,
                       const EstimateTarget& t) {
    double v = 0.0;
    switch (t.kind) {
    case EstimateTarget::Kind::MarginalCdf:
        v = provider.marginal_cdf(w, t.i, t.value);
        break;
    case EstimateTarget::Kind::MarginalQuantile:
        v = provider.marginal_quantile(w, t.i, t.value);
        break;
    case EstimateTarget::Kind::ConditionalCdf:
        v = provider.conditional_cdf(w, t.i, t.j, t.y_j, t.value);
        break;
    case EstimateTarget::Kind::ConditionalQuantile:
        v = provider.conditional_quantile(w, t.i, t.j, t.y_j, t.value);
        break;
    case EstimateTarget::Kind::ConditionalDensity:
        v = provider.conditional_density(w, t.i, t.j, t.y_j, t.value);
        break;
    }
    return t.scale * v;
}

double estimate_partial(const QuantileProvider& provider, const EstimateTarget& target,
                        const ContextPoint& w, Coordinate coordinate, const FdScheme& scheme) {
    if (coordinate.kind == Coordinate::Kind::ConditioningValue) {
        if (target.kind == EstimateTarget::Kind::MarginalCdf ||
            target.kind == EstimateTarget::Kind::MarginalQuantile)
            throw ArgumentError("marginal objects have no conditioning value");
        return fd_partial(
            [&](double y) {
                EstimateTarget t = target;
                t.y_j = y;
                return evaluate_target(provider, w, t);
            },
            target.y_j, scheme);
    }
    const double at = coordinate_value(w, coordinate);
    return fd_partial(
        [&](double v) { return evaluate_target(provider, shifted(w, coordinate, v - at), target); },
        at, scheme);
}

} // namespace sslab
