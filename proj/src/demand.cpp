#include "sslab/demand.hpp"

#include "sslab/format.hpp"
#include "sslab/parallel.hpp"
#include "sslab/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sslab {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double norm_quantile(double u) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u); }

// Relative slack for budget feasibility checks.
constexpr double kBudgetSlack = 1e-12;

} // namespace

// ---------------------------------------------------------------- ShareLaw

void ShareLaw::validate() const {
    if (lo.size() != 2 || hi.size() != 2)
        throw ArgumentError("share law must have exactly two components");
    for (int k = 0; k < 2; ++k) {
        if (!(lo[k] >= 0.0) || !(hi[k] >= lo[k]))
            throw ArgumentError("share law component " + std::to_string(k + 1) +
                                " needs 0 <= lo <= hi");
    }
    if (lo[0] + lo[1] > 1.0) throw ArgumentError("share law lower bounds exceed the budget");
    if (!(std::abs(rho) < 1.0)) throw ArgumentError("copula parameter rho must be in (-1, 1)");
    if (!(std::abs(lambda) < 1.0)) throw ArgumentError("latent loading lambda must be in (-1, 1)");
    if (!(v_sd > 0.0)) throw ArgumentError("v_sd must be positive");
}

double ShareLaw::max_share_sum() const { return hi[0] + hi[1]; }

ShareLaw::Latent ShareLaw::latent(const std::optional<double>& v) const {
    if (!v || lambda == 0.0) return {};
    return {lambda * (*v / v_sd), std::sqrt(1.0 - lambda * lambda)};
}

double ShareLaw::share_from_latent(int k, double z) const {
    return lo[k] + (hi[k] - lo[k]) * norm_cdf(z);
}

double ShareLaw::latent_from_share(int k, double a) const {
    const double u = (a - lo[k]) / (hi[k] - lo[k]);
    if (!(u > 0.0 && u < 1.0))
        throw DomainError("share a" + std::to_string(k + 1) + "=" + format_double(a) +
                          " outside the open support (" + format_double(lo[k]) + ", " +
                          format_double(hi[k]) + ")");
    return norm_quantile(u);
}

double ShareLaw::cdf(int k, double t, const std::optional<double>& v) const {
    if (degenerate(k)) return t >= lo[k] ? 1.0 : 0.0;
    const double u = (t - lo[k]) / (hi[k] - lo[k]);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const Latent l = latent(v);
    if (l.mean == 0.0 && l.sd == 1.0) return u;
    return norm_cdf((norm_quantile(u) - l.mean) / l.sd);
}

double ShareLaw::quantile(int k, double level, const std::optional<double>& v) const {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("quantile level must lie in (0,1)");
    if (degenerate(k)) return lo[k];
    const Latent l = latent(v);
    if (l.mean == 0.0 && l.sd == 1.0) return lo[k] + (hi[k] - lo[k]) * level;
    return share_from_latent(k, l.mean + l.sd * norm_quantile(level));
}

double ShareLaw::conditional_cdf(int i, double t, int j, double given,
                                 const std::optional<double>& v) const {
    if (degenerate(i)) return t >= lo[i] ? 1.0 : 0.0;
    if (degenerate(j)) return cdf(i, t, v);
    const double u = (t - lo[i]) / (hi[i] - lo[i]);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const Latent l = latent(v);
    const double e_j = (latent_from_share(j, given) - l.mean) / l.sd;
    const double cond_mean = l.mean + l.sd * rho * e_j;
    const double cond_sd = l.sd * std::sqrt(1.0 - rho * rho);
    return norm_cdf((norm_quantile(u) - cond_mean) / cond_sd);
}

std::pair<double, double> ShareLaw::innovations(std::uint64_t seed, std::uint64_t index) const {
    const double g1 = rng::normal(seed, rng::stream::kLatentShare, index, 0);
    const double g2 = rng::normal(seed, rng::stream::kLatentShare, index, 1);
    return {g1, rho * g1 + std::sqrt(1.0 - rho * rho) * g2};
}

HeterogeneityDraw ShareLaw::draw(std::uint64_t seed, std::uint64_t index,
                                 const std::optional<double>& v) const {
    const auto [e1, e2] = innovations(seed, index);
    const Latent l = latent(v);
    HeterogeneityDraw out{Vec(2)};
    out.a[0] = share_from_latent(0, l.mean + l.sd * e1);
    out.a[1] = share_from_latent(1, l.mean + l.sd * e2);
    return out;
}

std::vector<HeterogeneityDraw> ShareLaw::sample(std::size_t n, std::uint64_t seed,
                                                const std::vector<double>* v_per_draw) const {
    if (n == 0) throw ArgumentError("sample size must be at least 1");
    if (v_per_draw && v_per_draw->size() != n)
        throw ArgumentError("v_per_draw length must equal n");
    std::vector<HeterogeneityDraw> out(n);
    parallel_for(n, [&](std::size_t k) {
        std::optional<double> v;
        if (v_per_draw) v = (*v_per_draw)[k];
        out[k] = draw(seed, k, v);
    });
    return out;
}

nlohmann::json ShareLaw::to_json() const {
    return {{"lo", lo}, {"hi", hi}, {"rho", rho}, {"lambda", lambda}, {"v_sd", v_sd}};
}

ShareLaw ShareLaw::from_json(const nlohmann::json& j) {
    static const char* known[] = {"lo", "hi", "rho", "lambda", "v_sd"};
    for (const auto& [key, _] : j.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw ConfigError("unknown key 'law." + key + "'");
    ShareLaw law;
    if (j.contains("lo")) law.lo = j.at("lo").get<std::vector<double>>();
    if (j.contains("hi")) law.hi = j.at("hi").get<std::vector<double>>();
    law.rho = j.value("rho", law.rho);
    law.lambda = j.value("lambda", law.lambda);
    law.v_sd = j.value("v_sd", law.v_sd);
    law.validate();
    return law;
}

double gaussian_copula_spearman(double rho) {
    return 6.0 / std::numbers::pi * std::asin(rho / 2.0);
}

// ------------------------------------------------------------ DemandSystem

Mat DemandSystem::slutsky(const ContextPoint& w, const HeterogeneityDraw& a) const {
    const Vec y = demand(w, a);
    const DemandDerivatives d = derivatives(w, a);
    return d.price_jacobian + d.income * y.transpose();
}

double DemandSystem::slutsky_asymmetry(const ContextPoint& w, const HeterogeneityDraw& a,
                                       GoodIndex i, GoodIndex j) const {
    i.check(num_inside_goods());
    j.check(num_inside_goods());
    if (i == j) throw ArgumentError("slutsky_asymmetry needs i != j");
    const Mat s = slutsky(w, a);
    return s(i.zero_based(), j.zero_based()) - s(j.zero_based(), i.zero_based());
}

HeterogeneityDraw DemandSystem::pin(const ContextPoint& w, GoodIndex i, double y_i, GoodIndex j,
                                    double y_j) const {
    if (!invertible() || !monotone(i) || !monotone(j))
        throw StateError(name() + ": conditioning on (Y_i, Y_j) does not pin the draw");
    if (i == j) throw ArgumentError("pin needs i != j");
    HeterogeneityDraw out{Vec::Zero(num_inside_goods())};
    out.a[i.zero_based()] = invert_good(w, i, y_i);
    out.a[j.zero_based()] = invert_good(w, j, y_j);
    return out;
}

// ------------------------------------------------------- ShareDemandSystem

ShareDemandSystem::ShareDemandSystem(std::string name, double cross_price, ShareLaw law)
    : name_(std::move(name)), c_(cross_price), law_(std::move(law)) {
    law_.validate();
    if (!std::isfinite(c_)) throw ArgumentError("cross-price coefficient must be finite");
}

void ShareDemandSystem::check_draw(const ContextPoint& w, const HeterogeneityDraw& a) const {
    w.validate();
    if (w.num_inside_goods() != 2)
        throw DomainError(name_ + " expects 2 prices, got " + std::to_string(w.p.size()));
    if (a.a.size() != 2) throw DomainError(name_ + " expects a 2-dimensional preference draw");
    for (int k = 0; k < 2; ++k)
        if (!(a.a[k] >= 0.0))
            throw DomainError("share a" + std::to_string(k + 1) + " must be nonnegative");
    const double spent = (a.a[0] + a.a[1]) * w.x + c_ * w.p[0] * w.p[1];
    if (spent > w.x * (1.0 + kBudgetSlack))
        throw DomainError("budget violated: p'y = " + format_double(spent) + " > x = " +
                          format_double(w.x));
}

void ShareDemandSystem::check_context(const ContextPoint& w) const {
    w.validate();
    if (w.num_inside_goods() != 2)
        throw DomainError(name_ + " expects 2 prices, got " + std::to_string(w.p.size()));
    const double best = (law_.lo[0] + law_.lo[1]) * w.x + c_ * w.p[0] * w.p[1];
    if (best > w.x * (1.0 + kBudgetSlack))
        throw DomainError(name_ + ": no share draw is budget feasible at this context");
    if (law_.lo[0] * w.x / w.p[0] + c_ * w.p[1] < 0.0)
        throw DomainError(name_ + ": negative demand for good 1 at this context");
}

void ShareDemandSystem::check_all_draws_feasible(const ContextPoint& w) const {
    check_context(w);
    const double worst = law_.max_share_sum() * w.x + c_ * w.p[0] * w.p[1];
    if (worst > w.x * (1.0 + kBudgetSlack))
        throw DomainError(name_ + ": context infeasible for the share support, need x >= " +
                          format_double(c_ * w.p[0] * w.p[1] / (1.0 - law_.max_share_sum())));
}

Vec ShareDemandSystem::demand(const ContextPoint& w, const HeterogeneityDraw& a) const {
    check_draw(w, a);
    Vec y(2);
    y[0] = a.a[0] * w.x / w.p[0] + c_ * w.p[1];
    y[1] = a.a[1] * w.x / w.p[1];
    return y;
}

DemandDerivatives ShareDemandSystem::derivatives(const ContextPoint& w,
                                                 const HeterogeneityDraw& a) const {
    check_draw(w, a);
    DemandDerivatives d{Mat::Zero(2, 2), Vec(2)};
    d.price_jacobian(0, 0) = -a.a[0] * w.x / (w.p[0] * w.p[0]);
    d.price_jacobian(0, 1) = c_;
    d.price_jacobian(1, 1) = -a.a[1] * w.x / (w.p[1] * w.p[1]);
    d.income[0] = a.a[0] / w.p[0];
    d.income[1] = a.a[1] / w.p[1];
    return d;
}

double ShareDemandSystem::invert_good(const ContextPoint& w, GoodIndex k, double y) const {
    k.check(2);
    w.validate();
    if (k.value() == 1) return (y - c_ * w.p[1]) * w.p[0] / w.x;
    return y * w.p[1] / w.x;
}

std::pair<double, double> ShareDemandSystem::image(const ContextPoint& w, GoodIndex k) const {
    k.check(2);
    w.validate();
    const int z = k.zero_based();
    const double shift = z == 0 ? c_ * w.p[1] : 0.0;
    return {law_.lo[z] * w.x / w.p[z] + shift, law_.hi[z] * w.x / w.p[z] + shift};
}

nlohmann::json ShareDemandSystem::to_json() const {
    return {{"name", name_}, {"c", c_}, {"law", law_.to_json()}};
}

std::shared_ptr<const DemandSystem> make_cd3(ShareLaw law) {
    return std::make_shared<ShareDemandSystem>("CD3", 0.0, std::move(law));
}

std::shared_ptr<const DemandSystem> make_asym3(double c, ShareLaw law) {
    return std::make_shared<ShareDemandSystem>("ASYM3", c, std::move(law));
}

std::shared_ptr<const DemandSystem> make_system(const nlohmann::json& spec) {
    for (const auto& [key, _] : spec.items())
        if (key != "name" && key != "c" && key != "law")
            throw ConfigError("unknown key 'system." + key + "'");
    if (!spec.contains("name")) throw ConfigError("missing field 'system.name'");
    const auto name = spec.at("name").get<std::string>();
    const ShareLaw law = spec.contains("law") ? ShareLaw::from_json(spec.at("law")) : ShareLaw{};
    if (name == "CD3") {
        if (spec.value("c", 0.0) != 0.0) throw ConfigError("CD3 has no cross-price term");
        return make_cd3(law);
    }
    if (name == "ASYM3") return make_asym3(spec.value("c", 0.5), law);
    throw ConfigError("unknown demand system '" + name + "'");
}

// ------------------------------------------------------------------ Design

double Distribution::draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) const {
    switch (kind) {
    case Kind::Constant:
        return a;
    case Kind::Uniform:
        return a + (b - a) * rng::uniform(seed, stream, index);
    case Kind::Normal:
        return a + b * rng::truncated_normal(seed, stream, index, 3.0);
    }
    return a;
}

double Distribution::lower() const {
    switch (kind) {
    case Kind::Constant:
    case Kind::Uniform:
        return a;
    case Kind::Normal:
        return a - 3.0 * b;
    }
    return a;
}

double Distribution::upper() const {
    switch (kind) {
    case Kind::Constant:
        return a;
    case Kind::Uniform:
        return b;
    case Kind::Normal:
        return a + 3.0 * b;
    }
    return a;
}

void Distribution::validate(const std::string& what) const {
    if (!std::isfinite(a) || !std::isfinite(b)) throw ArgumentError(what + ": non-finite bound");
    if (kind == Kind::Uniform && !(b > a)) throw ArgumentError(what + ": uniform needs lo < hi");
    if (kind == Kind::Normal && !(b > 0.0)) throw ArgumentError(what + ": normal needs sd > 0");
}

nlohmann::json Distribution::to_json() const {
    switch (kind) {
    case Kind::Constant:
        return {{"kind", "constant"}, {"value", a}};
    case Kind::Uniform:
        return {{"kind", "uniform"}, {"lo", a}, {"hi", b}};
    case Kind::Normal:
        return {{"kind", "normal"}, {"mean", a}, {"sd", b}};
    }
    return {};
}

Distribution Distribution::from_json(const nlohmann::json& j) {
    if (j.is_number()) return constant(j.get<double>());
    const auto kind = j.at("kind").get<std::string>();
    auto check_keys = [&](std::initializer_list<const char*> keys) {
        for (const auto& [key, _] : j.items()) {
            if (key == "kind") continue;
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
                throw ConfigError("unknown key '" + key + "' in " + kind + " distribution");
        }
    };
    if (kind == "constant") {
        check_keys({"value"});
        return constant(j.at("value").get<double>());
    }
    if (kind == "uniform") {
        check_keys({"lo", "hi"});
        return uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    }
    if (kind == "normal") {
        check_keys({"mean", "sd"});
        return normal(j.at("mean").get<double>(), j.at("sd").get<double>());
    }
    throw ConfigError("unknown distribution kind '" + kind + "'");
}

void Design::validate(int num_inside_goods) const {
    if (prices.empty()) throw ArgumentError("empty design: no price distributions");
    if (static_cast<int>(prices.size()) != num_inside_goods)
        throw ArgumentError("design has " + std::to_string(prices.size()) +
                            " price distributions, system needs " +
                            std::to_string(num_inside_goods));
    for (std::size_t k = 0; k < prices.size(); ++k) {
        prices[k].validate("price p" + std::to_string(k + 1));
        if (!(prices[k].lower() > 0.0))
            throw DomainError("design price p" + std::to_string(k + 1) +
                              " support reaches nonpositive values");
    }
    income.validate("income");
    instrument.validate("instrument");
    for (std::size_t k = 0; k < characteristics.size(); ++k)
        characteristics[k].validate("characteristic q" + std::to_string(k + 1));
}

nlohmann::json Design::to_json() const {
    nlohmann::json j;
    j["prices"] = nlohmann::json::array();
    for (const auto& d : prices) j["prices"].push_back(d.to_json());
    j["income"] = income.to_json();
    j["characteristics"] = nlohmann::json::array();
    for (const auto& d : characteristics) j["characteristics"].push_back(d.to_json());
    j["instrument"] = instrument.to_json();
    return j;
}

Design Design::from_json(const nlohmann::json& j) {
    Design d;
    for (const auto& [key, _] : j.items())
        if (key != "prices" && key != "income" && key != "characteristics" && key != "instrument")
            throw ConfigError("unknown key 'design." + key + "'");
    if (j.contains("prices"))
        for (const auto& e : j.at("prices")) d.prices.push_back(Distribution::from_json(e));
    if (j.contains("income")) d.income = Distribution::from_json(j.at("income"));
    if (j.contains("characteristics"))
        for (const auto& e : j.at("characteristics"))
            d.characteristics.push_back(Distribution::from_json(e));
    if (j.contains("instrument")) d.instrument = Distribution::from_json(j.at("instrument"));
    return d;
}

double first_stage(const Vec& p, double s, double v) { return 0.5 * p.sum() + s + v; }

// ---------------------------------------------------------------- Datasets

std::uint64_t SimulatedDataset::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const double* data, Eigen::Index count) {
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(data),
                                   static_cast<std::size_t>(count) * sizeof(double)),
                  h);
    };
    mix(y.data(), y.size());
    mix(p.data(), p.size());
    mix(x.data(), x.size());
    mix(q.data(), q.size());
    mix(s.data(), s.size());
    mix(v_true.data(), v_true.size());
    if (v_hat) mix(v_hat->data(), v_hat->size());
    return h;
}

SimulatedDataset simulate_cross_section(const DemandSystem& system, const Design& design,
                                        std::size_t n, std::uint64_t seed, bool endogenous) {
    if (n == 0) throw ArgumentError("sample size must be at least 1");
    const int goods = system.num_inside_goods();
    design.validate(goods);
    const ShareLaw& law = system.law();

    // Worst corner of the design for budget feasibility: highest prices, lowest income.
    ContextPoint corner;
    corner.p = Vec(goods);
    for (int k = 0; k < goods; ++k) corner.p[k] = design.prices[k].upper();
    if (endogenous) {
        Vec p_lo(goods);
        for (int k = 0; k < goods; ++k) p_lo[k] = design.prices[k].lower();
        corner.x = first_stage(p_lo, design.instrument.lower(), -3.0 * law.v_sd);
    } else {
        corner.x = design.income.lower();
    }
    try {
        system.check_all_draws_feasible(corner);
    } catch (const DomainError& e) {
        throw DomainError(std::string("design support outside the system support: ") + e.what());
    }

    const int num_q = static_cast<int>(design.characteristics.size());
    SimulatedDataset out;
    const auto rows = static_cast<Eigen::Index>(n);
    out.y = Mat(rows, goods);
    out.p = Mat(rows, goods);
    out.x = Vec(rows);
    out.q = Mat(rows, num_q);
    out.s = Vec(rows);
    out.v_true = Vec(rows);

    parallel_for(n, [&](std::size_t r) {
        const auto row = static_cast<Eigen::Index>(r);
        ContextPoint w;
        w.p = Vec(goods);
        for (int k = 0; k < goods; ++k)
            w.p[k] = design.prices[k].draw(seed, rng::stream::kPrice + k, r);
        w.q = Vec(num_q);
        for (int k = 0; k < num_q; ++k)
            w.q[k] = design.characteristics[k].draw(seed, rng::stream::kCharacteristic + k, r);
        const double s = design.instrument.draw(seed, rng::stream::kInstrument, r);
        const double v =
            law.v_sd * rng::truncated_normal(seed, rng::stream::kControl, r, 3.0);
        w.x = endogenous ? first_stage(w.p, s, v) : design.income.draw(seed, rng::stream::kIncome, r);
        std::optional<double> v_cond;
        if (endogenous) v_cond = v;
        const HeterogeneityDraw a = law.draw(seed, r, v_cond);
        Vec y;
        try {
            y = system.demand(w, a);
        } catch (const DomainError& e) {
            throw DomainError("row " + std::to_string(r) + ": " + e.what());
        }
        out.y.row(row) = y.transpose();
        out.p.row(row) = w.p.transpose();
        out.x[row] = w.x;
        if (num_q > 0) out.q.row(row) = w.q.transpose();
        out.s[row] = s;
        out.v_true[row] = v;
    });

    out.meta.system = system.to_json();
    out.meta.seed = seed;
    out.meta.n = n;
    out.meta.design = design.to_json();
    out.meta.endogenous = endogenous;
    return out;
}

} // namespace sslab
