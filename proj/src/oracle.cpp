#include "sslab/oracle.hpp"

#include "sslab/fd.hpp"
#include "sslab/format.hpp"
#include "sslab/kernel.hpp"
#include "sslab/rng.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>

namespace sslab {

double QuantileProvider::two_context_conditional_cdf(const ContextPoint&, const ContextPoint&,
                                                     GoodIndex, GoodIndex, double,
                                                     double) const {
    throw StateError("this provider has no access to the structural function");
}

// Common random numbers: correlated innovations (e_1, e_2) for joint draws and
// an independent normal g for draws from the law of a_i given a pinned a_j.
struct PopulationOracle::Draws {
    std::vector<double> e1, e2, g;
};

namespace {

constexpr double kSqrt12 = 3.4641016151377544;

double spread(std::pair<double, double> image) {
    const double width = image.second - image.first;
    return width > 0.0 ? width / kSqrt12 : 1e-6 * std::max(1.0, std::abs(image.first));
}

double smoothed_indicator(double y, double at, double bandwidth) {
    return kernel::biweight_cdf((at - y) / bandwidth);
}

} // namespace

PopulationOracle::PopulationOracle(std::shared_ptr<const DemandSystem> system,
                                   OracleSettings settings)
    : system_(std::move(system)), settings_(std::move(settings)) {
    if (!system_) throw ArgumentError("oracle needs a demand system");
    if (settings_.integration == Integration::MonteCarlo && settings_.draws < 1000)
        throw ArgumentError("Monte Carlo oracle needs at least 1000 draws");
    if (!(settings_.outcome_smoothing > 0.0) || !(settings_.conditioning_bandwidth > 0.0))
        throw ArgumentError("oracle smoothing fractions must be positive");
    if (!(settings_.scheme.h > 0.0)) throw ArgumentError("finite-difference step must be positive");
}

PopulationOracle::~PopulationOracle() = default;

const PopulationOracle::Draws& PopulationOracle::draws() const {
    std::call_once(draws_once_, [&] {
        auto d = std::make_unique<Draws>();
        const std::size_t n = settings_.draws;
        d->e1.resize(n);
        d->e2.resize(n);
        d->g.resize(n);
        const ShareLaw& law = system_->law();
        for (std::size_t k = 0; k < n; ++k) {
            const auto [a, b] = law.innovations(settings_.seed, k);
            d->e1[k] = a;
            d->e2[k] = b;
            d->g[k] = rng::normal(settings_.seed, rng::stream::kOracleDraws, k);
        }
        draws_ = std::move(d);
    });
    return *draws_;
}

void PopulationOracle::check_goods(GoodIndex i, GoodIndex j) const {
    i.check(num_inside_goods());
    j.check(num_inside_goods());
    if (i == j) throw ArgumentError("conditional objects need i != j");
}

bool PopulationOracle::conditioning_is_approximate(GoodIndex j) const {
    return settings_.force_smoothed_conditioning || !system_->monotone(j);
}

double PopulationOracle::marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const {
    i.check(num_inside_goods());
    system_->check_context(w);
    const ShareLaw& law = system_->law();
    if (settings_.integration == Integration::Quadrature && system_->monotone(i))
        return law.cdf(i.zero_based(), system_->invert_good(w, i, y), w.v);

    const Draws& d = draws();
    const auto latent = law.latent(w.v);
    const double b = settings_.outcome_smoothing * spread(system_->image(w, i));
    double sum = 0.0;
    HeterogeneityDraw a{Vec(2)};
    for (std::size_t k = 0; k < d.e1.size(); ++k) {
        a.a[0] = law.share_from_latent(0, latent.mean + latent.sd * d.e1[k]);
        a.a[1] = law.share_from_latent(1, latent.mean + latent.sd * d.e2[k]);
        sum += smoothed_indicator(system_->demand(w, a)[i.zero_based()], y, b);
    }
    return sum / static_cast<double>(d.e1.size());
}

double PopulationOracle::bisect(const std::function<double(double)>& cdf,
                                std::pair<double, double> image, double level,
                                const char* what) const {
    if (!(level > 0.0 && level < 1.0))
        throw ArgumentError(std::string(what) + " level must lie in (0,1), got " +
                            format_double(level));
    const double pad = 0.1 * std::max(image.second - image.first,
                                      1e-3 * std::max(1.0, std::abs(image.first)));
    const double lo = image.first - pad;
    const double hi = image.second + pad;
    auto f = [&](double y) { return cdf(y) - level; };
    if (f(lo) > 0.0 || f(hi) < 0.0)
        throw BracketError(std::string(what) + ": level " + format_double(level) +
                           " not bracketed by [" + format_double(lo) + ", " + format_double(hi) +
                           "]");
    std::uintmax_t iterations = 200;
    const auto [a, b] = boost::math::tools::bisect(
        f, lo, hi, boost::math::tools::eps_tolerance<double>(), iterations);
    return 0.5 * (a + b);
}

double PopulationOracle::marginal_quantile(const ContextPoint& w, GoodIndex i,
                                           double level) const {
    i.check(num_inside_goods());
    system_->check_context(w);
    return bisect([&](double y) { return marginal_cdf(w, i, y); }, system_->image(w, i), level,
                  "marginal quantile");
}

double PopulationOracle::two_context_conditional_cdf(const ContextPoint& w_struct,
                                                     const ContextPoint& w_cond, GoodIndex i,
                                                     GoodIndex j, double y_j, double y_i) const {
    check_goods(i, j);
    system_->check_context(w_struct);
    system_->check_context(w_cond);
    if (conditioning_is_approximate(j))
        return smoothed_two_context(w_struct, w_cond, i, j, y_j, y_i,
                                    settings_.conditioning_bandwidth);

    const ShareLaw& law = system_->law();
    const int zi = i.zero_based();
    const int zj = j.zero_based();
    const double a_j = system_->invert_good(w_cond, j, y_j);
    if (law.degenerate(zj)) {
        if (std::abs(a_j - law.lo[static_cast<std::size_t>(zj)]) > 1e-9)
            throw DomainError("conditioning value y_j=" + format_double(y_j) +
                              " outside the image of good " + std::to_string(j.value()));
    } else if (!(a_j > law.lo[static_cast<std::size_t>(zj)] &&
                 a_j < law.hi[static_cast<std::size_t>(zj)])) {
        const auto [lo, hi] = system_->image(w_cond, j);
        throw DomainError("conditioning value y_j=" + format_double(y_j) +
                          " outside the image (" + format_double(lo) + ", " + format_double(hi) +
                          ") of good " + std::to_string(j.value()));
    }

    if (settings_.integration == Integration::Quadrature && system_->monotone(i))
        return law.conditional_cdf(zi, system_->invert_good(w_struct, i, y_i), zj, a_j, w_cond.v);

    // Monte Carlo over the law of a_i given the pinned a_j.
    const Draws& d = draws();
    const auto latent = law.latent(w_cond.v);
    const double b = settings_.outcome_smoothing * spread(system_->image(w_struct, i));
    double cond_mean = latent.mean;
    double cond_sd = latent.sd;
    if (!law.degenerate(zj)) {
        const double e_j = (law.latent_from_share(zj, a_j) - latent.mean) / latent.sd;
        cond_mean = latent.mean + latent.sd * law.rho * e_j;
        cond_sd = latent.sd * std::sqrt(1.0 - law.rho * law.rho);
    }
    HeterogeneityDraw a{Vec(2)};
    a.a[zj] = a_j;
    double sum = 0.0;
    for (std::size_t k = 0; k < d.g.size(); ++k) {
        a.a[zi] = law.share_from_latent(zi, cond_mean + cond_sd * d.g[k]);
        sum += smoothed_indicator(system_->demand(w_struct, a)[zi], y_i, b);
    }
    return sum / static_cast<double>(d.g.size());
}

double PopulationOracle::smoothed_two_context(const ContextPoint& w_struct,
                                              const ContextPoint& w_cond, GoodIndex i,
                                              GoodIndex j, double y_j, double y_i,
                                              double bandwidth_factor) const {
    const Draws& d = draws();
    const ShareLaw& law = system_->law();
    const auto latent = law.latent(w_cond.v);
    const double h = bandwidth_factor * spread(system_->image(w_cond, j));
    const double b = settings_.outcome_smoothing * spread(system_->image(w_struct, i));
    double num = 0.0, den = 0.0;
    HeterogeneityDraw a{Vec(2)};
    for (std::size_t k = 0; k < d.e1.size(); ++k) {
        a.a[0] = law.share_from_latent(0, latent.mean + latent.sd * d.e1[k]);
        a.a[1] = law.share_from_latent(1, latent.mean + latent.sd * d.e2[k]);
        const double wk =
            kernel::biweight_weight((system_->demand(w_cond, a)[j.zero_based()] - y_j) / h);
        if (wk <= 0.0) continue;
        den += wk;
        num += wk * smoothed_indicator(system_->demand(w_struct, a)[i.zero_based()], y_i, b);
    }
    if (den <= 0.0)
        throw DomainError("conditioning value y_j=" + format_double(y_j) +
                          " has no Monte Carlo mass within the conditioning bandwidth");
    return num / den;
}

BandwidthSensitivity PopulationOracle::conditioning_sensitivity(const ContextPoint& w_struct,
                                                                const ContextPoint& w_cond,
                                                                GoodIndex i, GoodIndex j,
                                                                double y_j, double y_i) const {
    check_goods(i, j);
    const double f = settings_.conditioning_bandwidth;
    BandwidthSensitivity out;
    out.bandwidth = f * spread(system_->image(w_cond, j));
    out.half = smoothed_two_context(w_struct, w_cond, i, j, y_j, y_i, 0.5 * f);
    out.base = smoothed_two_context(w_struct, w_cond, i, j, y_j, y_i, f);
    out.twice = smoothed_two_context(w_struct, w_cond, i, j, y_j, y_i, 2.0 * f);
    return out;
}

double PopulationOracle::conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                         double y_j, double y_i) const {
    return two_context_conditional_cdf(w, w, i, j, y_j, y_i);
}

double PopulationOracle::conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                             double y_j, double y_i) const {
    const double f = fd_partial([&](double y) { return conditional_cdf(w, i, j, y_j, y); }, y_i,
                                settings_.scheme);
    if (!(f >= settings_.density_floor))
        throw DegeneracyError("conditional density of good " + std::to_string(i.value()) + " at " +
                              format_double(y_i) + " is " + format_double(f) + " < floor " +
                              format_double(settings_.density_floor));
    return f;
}

double PopulationOracle::conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                              double y_j, double level) const {
    check_goods(i, j);
    system_->check_context(w);
    return bisect([&](double y) { return conditional_cdf(w, i, j, y_j, y); }, system_->image(w, i),
                  level, "conditional quantile");
}

double PopulationOracle::conditional_expectation_partial(const ContextPoint& w, int s, GoodIndex i,
                                                         GoodIndex j, double y_i,
                                                         double y_j) const {
    check_goods(i, j);
    system_->check_context(w);
    const int goods = num_inside_goods();
    const Coordinate coord = Coordinate::from_derivative_index(s, goods);
    auto partial = [&](const HeterogeneityDraw& a) {
        const DemandDerivatives d = system_->derivatives(w, a);
        return coord.kind == Coordinate::Kind::Price ? d.price_jacobian(i.zero_based(), s - 1)
                                                     : d.income[i.zero_based()];
    };
    const ShareLaw& law = system_->law();

    if (system_->invertible() && !settings_.force_smoothed_conditioning) {
        const HeterogeneityDraw a = system_->pin(w, i, y_i, j, y_j);
        for (int k = 0; k < goods; ++k) {
            const auto z = static_cast<std::size_t>(k);
            if (a.a[k] < law.lo[z] - 1e-12 || a.a[k] > law.hi[z] + 1e-12)
                throw DomainError("(y_i, y_j) = (" + format_double(y_i) + ", " + format_double(y_j) +
                                  ") outside the joint image at this context");
        }
        return partial(a);
    }

    // Product-kernel conditioning on both demands over the joint draws.
    const Draws& d = draws();
    const auto latent = law.latent(w.v);
    const double hi_ = settings_.conditioning_bandwidth * spread(system_->image(w, i));
    const double hj = settings_.conditioning_bandwidth * spread(system_->image(w, j));
    double num = 0.0, den = 0.0;
    HeterogeneityDraw a{Vec(2)};
    for (std::size_t k = 0; k < d.e1.size(); ++k) {
        a.a[0] = law.share_from_latent(0, latent.mean + latent.sd * d.e1[k]);
        a.a[1] = law.share_from_latent(1, latent.mean + latent.sd * d.e2[k]);
        const Vec y = system_->demand(w, a);
        const double wk = kernel::biweight_weight((y[i.zero_based()] - y_i) / hi_) *
                          kernel::biweight_weight((y[j.zero_based()] - y_j) / hj);
        if (wk <= 0.0) continue;
        den += wk;
        num += wk * partial(a);
    }
    if (den <= 0.0)
        throw DomainError("(y_i, y_j) has no Monte Carlo mass within the conditioning bandwidth");
    return num / den;
}

} // namespace sslab
