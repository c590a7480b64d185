#include "sslab/symmetry.hpp"

#include "sslab/fd.hpp"
#include "sslab/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FdScheme scheme_for(const QuantileProvider& provider, Coordinate c,
                    const std::optional<FdScheme>& override_scheme) {
    return override_scheme ? *override_scheme : provider.fd_scheme(c);
}

void check_round_trip(double got, double want, double tol, const char* what) {
    if (!(std::abs(got - want) <= tol * std::max(1.0, std::abs(want))))
        throw ProviderInconsistencyError(std::string(what) + " round trip gives " +
                                         format_double(got) + " for " + format_double(want));
}

EvaluationPoint swapped(const EvaluationPoint& pt) {
    EvaluationPoint out = pt;
    std::swap(out.i, out.j);
    std::swap(out.y_i, out.y_j);
    std::swap(out.level_i, out.level_j);
    return out;
}

QuantileIndices swapped(const QuantileIndices& q) {
    return {q.alpha_j, q.alpha_i, q.gamma_j_given_i, q.gamma_i_given_j};
}

} // namespace

QuantileIndices quantile_indices(const QuantileProvider& provider, const EvaluationPoint& pt) {
    if (pt.i == pt.j) throw ArgumentError("quantile indices need i != j");
    QuantileIndices q;
    q.alpha_i = provider.marginal_cdf(pt.w, pt.i, pt.y_i);
    q.alpha_j = provider.marginal_cdf(pt.w, pt.j, pt.y_j);
    q.gamma_i_given_j = provider.conditional_cdf(pt.w, pt.i, pt.j, pt.y_j, pt.y_i);
    q.gamma_j_given_i = provider.conditional_cdf(pt.w, pt.j, pt.i, pt.y_i, pt.y_j);
    for (double level : {q.alpha_i, q.alpha_j, q.gamma_i_given_j, q.gamma_j_given_i})
        if (!(level > 0.0 && level < 1.0))
            throw DomainError("point (" + format_double(pt.y_i) + ", " + format_double(pt.y_j) +
                              ") is not interior: a quantile index is " + format_double(level));
    const double tol = provider.round_trip_tolerance();
    check_round_trip(provider.marginal_quantile(pt.w, pt.i, q.alpha_i), pt.y_i, tol,
                     "marginal quantile of good i");
    check_round_trip(provider.marginal_quantile(pt.w, pt.j, q.alpha_j), pt.y_j, tol,
                     "marginal quantile of good j");
    check_round_trip(provider.conditional_quantile(pt.w, pt.i, pt.j, pt.y_j, q.gamma_i_given_j),
                     pt.y_i, tol, "conditional quantile of good i");
    check_round_trip(provider.conditional_quantile(pt.w, pt.j, pt.i, pt.y_i, q.gamma_j_given_i),
                     pt.y_j, tol, "conditional quantile of good j");
    return q;
}

DirectionTerms direction_terms(const QuantileProvider& provider, const EvaluationPoint& pt,
                               const QuantileIndices& indices, ChannelMode channel,
                               const std::vector<int>& which,
                               const std::optional<FdScheme>& scheme) {
    if (pt.i == pt.j) throw ArgumentError("symmetry terms need i != j");
    if (channel == ChannelMode::Frozen && !provider.supports_two_context())
        throw StateError("the frozen channel needs a provider with structural access");
    const int goods = provider.num_inside_goods();
    const int num_s = goods + 1;
    std::vector<int> coords = which;
    if (coords.empty())
        for (int s = 1; s <= num_s; ++s) coords.push_back(s);

    DirectionTerms t;
    t.channel = channel;
    t.partial_k_i = Vec::Constant(num_s, kNaN);
    t.partial_k_j = Vec::Constant(num_s, kNaN);
    t.partial_F = Vec::Constant(num_s, kNaN);

    const ContextPoint& w = pt.w;
    const GoodIndex i = pt.i, j = pt.j;
    const double y_i = pt.y_i, y_j = pt.y_j;
    const double gamma = indices.gamma_i_given_j;
    const double alpha_j = indices.alpha_j;

    t.density = provider.conditional_density(w, i, j, y_j, y_i);

    const Coordinate cond = Coordinate::conditioning_value(j.value());
    t.partial2_k_i = fd_partial(
        [&](double y) { return provider.conditional_quantile(w, i, j, y, gamma); }, y_j,
        scheme_for(provider, cond, scheme));
    if (channel == ChannelMode::StableComposition) {
        t.partial2_F = 0.0;
    } else {
        // y_j only enters the conditioning event, so the frozen and observable
        // derivatives in the conditioning value coincide.
        t.partial2_F = fd_partial(
            [&](double y) { return provider.conditional_cdf(w, i, j, y, y_i); }, y_j,
            scheme_for(provider, cond, scheme));
    }

    for (int s : coords) {
        if (s < 1 || s > num_s)
            throw ArgumentError("derivative index s=" + std::to_string(s) + " outside 1.." +
                                std::to_string(num_s));
        const Coordinate c = Coordinate::from_derivative_index(s, goods);
        const FdScheme sc = scheme_for(provider, c, scheme);
        const double at = coordinate_value(w, c);
        auto at_shift = [&](double value) { return shifted(w, c, value - at); };
        t.partial_k_i[s - 1] = fd_partial(
            [&](double v) { return provider.conditional_quantile(at_shift(v), i, j, y_j, gamma); },
            at, sc);
        t.partial_k_j[s - 1] = fd_partial(
            [&](double v) { return provider.marginal_quantile(at_shift(v), j, alpha_j); }, at, sc);
        switch (channel) {
        case ChannelMode::Observable:
            t.partial_F[s - 1] = fd_partial(
                [&](double v) { return provider.conditional_cdf(at_shift(v), i, j, y_j, y_i); },
                at, sc);
            break;
        case ChannelMode::Frozen:
            t.partial_F[s - 1] = fd_partial(
                [&](double v) {
                    return provider.two_context_conditional_cdf(w, at_shift(v), i, j, y_j, y_i);
                },
                at, sc);
            break;
        case ChannelMode::StableComposition:
            t.partial_F[s - 1] = 0.0;
            break;
        }
    }
    return t;
}

double lemma1_rhs(const QuantileProvider& provider, const EvaluationPoint& pt, int s,
                  const QuantileIndices& indices, ChannelMode channel,
                  const std::optional<FdScheme>& scheme) {
    return direction_terms(provider, pt, indices, channel, {s}, scheme).lemma(s);
}

double correction_C(const QuantileProvider& provider, const EvaluationPoint& pt,
                    const QuantileIndices& indices, ChannelMode channel,
                    const std::optional<FdScheme>& scheme) {
    // C needs no w1 derivatives; request a single index and ignore it.
    return direction_terms(provider, pt, indices, channel, {provider.num_inside_goods() + 1},
                           scheme)
        .C();
}

namespace {

CorrectionTerms corrections_from(const DirectionTerms& t, int goods) {
    CorrectionTerms c;
    c.channel = t.channel;
    c.C = t.C();
    c.density = t.density;
    c.D = Vec(goods);
    for (int s = 1; s <= goods; ++s) c.D[s - 1] = std::isnan(t.partial_F[s - 1]) ? kNaN : t.D(s);
    c.D_x = t.D(goods + 1);
    return c;
}

} // namespace

CorrectionTerms correction_D(const QuantileProvider& provider, const EvaluationPoint& pt,
                             const QuantileIndices& indices, ChannelMode channel,
                             const std::optional<FdScheme>& scheme) {
    return corrections_from(direction_terms(provider, pt, indices, channel, {}, scheme),
                            provider.num_inside_goods());
}

SymmetryResidual symmetry_sides(const QuantileProvider& provider, const EvaluationPoint& pt,
                                const QuantileIndices& indices, ChannelMode channel,
                                const std::optional<FdScheme>& scheme, bool all_corrections) {
    const int goods = provider.num_inside_goods();
    pt.i.check(goods);
    pt.j.check(goods);
    const int income = goods + 1;
    // Both sides go through the same function with the roles exchanged, so
    // side(i, j) - side(j, i) is exactly antisymmetric.
    auto side = [&](const EvaluationPoint& p, const QuantileIndices& q, DirectionTerms* keep) {
        const int s_price = p.j.value();
        std::vector<int> which{s_price, income};
        if (keep && all_corrections) which.clear();
        DirectionTerms t = direction_terms(provider, p, q, channel, which, scheme);
        const double value = t.lemma(s_price) + t.lemma(income) * p.y_j;
        if (keep) *keep = std::move(t);
        return value;
    };
    SymmetryResidual r;
    r.point = pt;
    r.indices = indices;
    r.channel = channel;
    DirectionTerms ij;
    r.lhs = side(pt, indices, &ij);
    r.rhs = side(swapped(pt), swapped(indices), nullptr);
    r.residual = r.lhs - r.rhs;
    r.corrections = corrections_from(ij, goods);
    return r;
}

namespace {

GapSummary summarize(std::vector<double> v) {
    GapSummary s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    s.median = at(0.5);
    s.q90 = at(0.9);
    s.max = v.back();
    return s;
}

} // namespace

HicksianGapReport hicksian_gap_report(const QuantileProvider& provider,
                                      const std::vector<EvaluationPoint>& points,
                                      ChannelMode channel, double materiality,
                                      const std::optional<FdScheme>& scheme) {
    HicksianGapReport report;
    report.channel = channel;
    report.materiality = materiality;
    std::vector<double> cs, ds, dxs;
    for (const auto& pt : points) {
        GapRow row;
        row.point = pt;
        try {
            const QuantileIndices q = quantile_indices(provider, pt);
            const CorrectionTerms c = correction_D(provider, pt, q, channel, scheme);
            row.abs_C = std::abs(c.C);
            row.norm_D = c.D.norm();
            row.abs_D_x = std::abs(c.D_x);
            row.material =
                row.abs_C > materiality || row.norm_D > materiality || row.abs_D_x > materiality;
            cs.push_back(row.abs_C);
            ds.push_back(row.norm_D);
            dxs.push_back(row.abs_D_x);
        } catch (const Error& e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    report.C = summarize(cs);
    report.D = summarize(ds);
    report.D_x = summarize(dxs);
    return report;
}

} // namespace sslab
