#include "sslab/demand.hpp"
#include "sslab/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sslab {

namespace {

std::vector<double> linspace(double a, double b, int k) {
    if (k <= 1) return {0.5 * (a + b)};
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) out[static_cast<std::size_t>(t)] = a + (b - a) * t / (k - 1);
    return out;
}

std::vector<ContextPoint> context_grid(const ProbeRegion& region, int per_axis) {
    std::vector<std::vector<double>> axes;
    for (const auto& [a, b] : region.prices) axes.push_back(linspace(a, b, per_axis));
    axes.push_back(linspace(region.income.first, region.income.second, per_axis));
    std::vector<ContextPoint> out;
    std::vector<std::size_t> pos(axes.size(), 0);
    while (true) {
        ContextPoint w;
        w.p = Vec(static_cast<Eigen::Index>(region.prices.size()));
        for (std::size_t k = 0; k < region.prices.size(); ++k)
            w.p[static_cast<Eigen::Index>(k)] = axes[k][pos[k]];
        w.x = axes.back()[pos.back()];
        out.push_back(std::move(w));
        std::size_t k = 0;
        while (k < axes.size() && ++pos[k] == axes[k].size()) pos[k++] = 0;
        if (k == axes.size()) return out;
    }
}

// P(Y_i <= y_i | Y_j = y_j, w); a conditioning value outside the support
// carries no mass and yields NaN.
double conditional_cdf_y(const DemandSystem& sys, const ContextPoint& w, GoodIndex i, double y_i,
                         GoodIndex j, double y_j) {
    const double a_j = sys.invert_good(w, j, y_j);
    const double t = sys.invert_good(w, i, y_i);
    try {
        return sys.law().conditional_cdf(i.zero_based(), t, j.zero_based(), a_j, w.v);
    } catch (const DomainError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

double conditional_share_quantile(const ShareLaw& law, int i, double level, int j, double a_j,
                                  const std::optional<double>& v) {
    double lo = law.lo[static_cast<std::size_t>(i)];
    double hi = law.hi[static_cast<std::size_t>(i)];
    if (hi <= lo) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (law.conditional_cdf(i, mid, j, a_j, v) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Conditional quantile of Y_i given Y_j = y_j at w.
double quantile_y(const DemandSystem& sys, const ContextPoint& w, GoodIndex i, double level,
                  GoodIndex j, double y_j) {
    const double a_j = sys.invert_good(w, j, y_j);
    HeterogeneityDraw a{Vec::Zero(sys.num_inside_goods())};
    for (int k = 0; k < sys.num_inside_goods(); ++k)
        a.a[k] = 0.5 * (sys.law().lo[static_cast<std::size_t>(k)] +
                        sys.law().hi[static_cast<std::size_t>(k)]);
    a.a[j.zero_based()] = a_j;
    a.a[i.zero_based()] =
        conditional_share_quantile(sys.law(), i.zero_based(), level, j.zero_based(), a_j, w.v);
    return sys.demand(w, a)[i.zero_based()];
}

} // namespace

std::string_view to_string(ProbeStatus s) {
    switch (s) {
    case ProbeStatus::Pass: return "pass";
    case ProbeStatus::Warn: return "warn";
    case ProbeStatus::Fail: return "fail";
    }
    return "?";
}

bool RegularityReport::all_pass() const {
    return std::all_of(items.begin(), items.end(),
                       [](const ProbeItem& it) { return it.status == ProbeStatus::Pass; });
}

const ProbeItem& RegularityReport::item(const std::string& name) const {
    for (const auto& it : items)
        if (it.name == name) return it;
    throw ArgumentError("no probe item named '" + name + "'");
}

ProbeRegion default_interior_region(const DemandSystem& system) {
    ProbeRegion r;
    const auto& law = system.law();
    for (int k = 0; k < system.num_inside_goods(); ++k) {
        const double lo = law.lo[static_cast<std::size_t>(k)];
        const double hi = law.hi[static_cast<std::size_t>(k)];
        r.shares.emplace_back(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo));
    }
    r.prices = {{0.9, 1.1}, {1.8, 2.2}};
    r.prices.resize(static_cast<std::size_t>(system.num_inside_goods()), {0.9, 1.1});
    return r;
}

RegularityReport probe_regularity(const DemandSystem& system, const ProbeRegion& region,
                                  const ProbeSettings& settings) {
    const int goods = system.num_inside_goods();
    RegularityReport report;
    report.note =
        "items 4-5 (smoothness of the structural map and of the conditioning law) hold "
        "analytically for the built-in systems and are not probed";
    if (static_cast<int>(region.prices.size()) != goods ||
        static_cast<int>(region.shares.size()) != goods) {
        report.items.push_back({"density_lower_bound", ProbeStatus::Fail, 0.0,
                                "region dimensions do not match the system"});
        return report;
    }
    const auto contexts = context_grid(region, settings.context_points_per_axis);

    double min_density = std::numeric_limits<double>::infinity();
    double max_jump = 0.0;
    double max_fd_gap = 0.0;
    std::string density_where, jump_where, fd_where;

    for (const auto& w : contexts) {
        for (int gi = 1; gi <= goods; ++gi) {
            for (int gj = 1; gj <= goods; ++gj) {
                if (gi == gj) continue;
                const GoodIndex i(gi), j(gj);
                const auto& [si_lo, si_hi] = region.shares[static_cast<std::size_t>(gi - 1)];
                const auto& [sj_lo, sj_hi] = region.shares[static_cast<std::size_t>(gj - 1)];
                const auto share_i = linspace(si_lo - settings.neighborhood,
                                              si_hi + settings.neighborhood,
                                              settings.share_points_per_axis);
                const auto share_j = linspace(sj_lo - settings.neighborhood,
                                              sj_hi + settings.neighborhood,
                                              settings.share_points_per_axis);
                for (double aj : share_j) {
                    HeterogeneityDraw a{Vec::Zero(goods)};
                    for (int k = 0; k < goods; ++k)
                        a.a[k] = 0.5 * (system.law().lo[static_cast<std::size_t>(k)] +
                                        system.law().hi[static_cast<std::size_t>(k)]);
                    a.a[gj - 1] = aj;

                    // Item 1: conditional density of Y_i at the sampled shares.
                    double y_j = 0.0;
                    for (double ai : share_i) {
                        a.a[gi - 1] = ai;
                        const Vec y = system.demand(w, a);
                        y_j = y[gj - 1];
                        const double h = settings.fd_step * std::max(1.0, std::abs(y[gi - 1]));
                        const double up = conditional_cdf_y(system, w, i, y[gi - 1] + h, j, y_j);
                        const double dn = conditional_cdf_y(system, w, i, y[gi - 1] - h, j, y_j);
                        double dens = (up - dn) / (2.0 * h);
                        if (std::isnan(dens)) dens = 0.0;
                        if (dens < min_density) {
                            min_density = dens;
                            density_where = "good " + std::to_string(gi) + " | good " +
                                            std::to_string(gj) + " at shares (" +
                                            format_double(ai) + ", " + format_double(aj) + ")";
                        }
                    }

                    // Item 2: largest CDF increment across a fine grid over the image.
                    auto [lo, hi] = system.image(w, i);
                    const double pad = std::max(0.05 * (hi - lo), 1e-3 * std::max(1.0, std::abs(hi)));
                    lo -= pad;
                    hi += pad;
                    double prev = conditional_cdf_y(system, w, i, lo, j, y_j);
                    for (int c = 1; c <= settings.fine_grid; ++c) {
                        const double y = lo + (hi - lo) * c / settings.fine_grid;
                        const double cur = conditional_cdf_y(system, w, i, y, j, y_j);
                        if (!std::isnan(cur) && !std::isnan(prev) && cur - prev > max_jump) {
                            max_jump = cur - prev;
                            jump_where = "good " + std::to_string(gi) + " near y=" + format_double(y);
                        }
                        prev = cur;
                    }

                    // Item 3: quantile derivatives stable across step sizes.
                    if (system.law().degenerate(gi - 1) || system.law().degenerate(gj - 1)) continue;
                    if (!(aj > system.law().lo[static_cast<std::size_t>(gj - 1)] &&
                          aj < system.law().hi[static_cast<std::size_t>(gj - 1)]))
                        continue;
                    for (double level : {0.25, 0.5, 0.75}) {
                        for (int s = 1; s <= goods + 1; ++s) {
                            const Coordinate coord = Coordinate::from_derivative_index(s, goods);
                            auto fd = [&](double h) {
                                const double t = coordinate_value(w, coord);
                                const double step = h * std::max(1.0, std::abs(t));
                                return (quantile_y(system, shifted(w, coord, step), i, level, j, y_j) -
                                        quantile_y(system, shifted(w, coord, -step), i, level, j, y_j)) /
                                       (2.0 * step);
                            };
                            const double gap = std::abs(fd(settings.fd_step) - fd(0.5 * settings.fd_step));
                            if (gap > max_fd_gap) {
                                max_fd_gap = gap;
                                fd_where = "good " + std::to_string(gi) + " level " +
                                           format_double(level) + " in " + coord.name();
                            }
                        }
                    }
                }
            }
        }
    }

    ProbeItem density{"density_lower_bound", ProbeStatus::Pass, min_density, density_where};
    if (!(min_density >= settings.density_floor)) density.status = ProbeStatus::Warn;
    ProbeItem continuity{"cdf_continuity", ProbeStatus::Pass, max_jump, jump_where};
    if (max_jump > settings.jump_tolerance) continuity.status = ProbeStatus::Fail;
    ProbeItem smooth{"quantile_differentiability", ProbeStatus::Pass, max_fd_gap, fd_where};
    if (max_fd_gap > settings.fd_tolerance) smooth.status = ProbeStatus::Warn;
    report.items = {density, continuity, smooth};
    return report;
}

} // namespace sslab
