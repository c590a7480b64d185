#include "reference.hpp"

#include "sslab/estimator.hpp"
#include "sslab/oracle.hpp"
#include "sslab/symmetry.hpp"

#include <doctest.h>

using namespace sslab;

namespace {

const ContextPoint kW = ContextPoint::make({1.0, 2.0}, 10.0);
const GoodIndex g1(1), g2(2);

std::shared_ptr<const DemandSystem> copula_cd3(double rho) {
    ShareLaw law;
    law.rho = rho;
    return make_cd3(law);
}

EvaluationPoint at(const ContextPoint& w, double y1, double y2) {
    EvaluationPoint pt;
    pt.w = w;
    pt.i = g1;
    pt.j = g2;
    pt.y_i = y1;
    pt.y_j = y2;
    return pt;
}

// 3 contexts x 3 levels, (y_1, y_2) at matching marginal quantiles.
std::vector<EvaluationPoint> default_points(const QuantileProvider& p) {
    std::vector<EvaluationPoint> pts;
    for (const auto& w : {kW, ContextPoint::make({0.95, 2.05}, 10.5), ContextPoint::make({1.05, 1.95}, 9.5)})
        for (double level : {0.25, 0.5, 0.75}) {
            EvaluationPoint pt = at(w, p.marginal_quantile(w, g1, level), p.marginal_quantile(w, g2, level));
            pt.level_i = pt.level_j = level;
            pts.push_back(pt);
        }
    return pts;
}

// Delegates to an oracle but misreports conditional quantiles.
class SkewedProvider final : public QuantileProvider {
public:
    explicit SkewedProvider(const PopulationOracle& o) : o_(o) {}
    int num_inside_goods() const override { return o_.num_inside_goods(); }
    double marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const override { return o_.marginal_cdf(w, i, y); }
    double marginal_quantile(const ContextPoint& w, GoodIndex i, double l) const override { return o_.marginal_quantile(w, i, l); }
    double conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j, double yj, double yi) const override {
        return o_.conditional_cdf(w, i, j, yj, yi);
    }
    double conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j, double yj, double yi) const override {
        return o_.conditional_density(w, i, j, yj, yi);
    }
    double conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j, double yj, double l) const override {
        return o_.conditional_quantile(w, i, j, yj, l) + 0.1;
    }
    FdScheme fd_scheme(Coordinate c) const override { return o_.fd_scheme(c); }
    double round_trip_tolerance() const override { return 1e-6; }
    double density_floor() const override { return o_.density_floor(); }

private:
    const PopulationOracle& o_;
};

} // namespace

TEST_CASE("quantile indices") {
    const PopulationOracle o(make_cd3());
    const QuantileIndices q = quantile_indices(o, at(kW, 3.0, 2.0));
    CHECK(q.alpha_i == doctest::Approx(0.5));
    CHECK(q.alpha_j == doctest::Approx(0.5));
    CHECK(q.gamma_i_given_j == doctest::Approx(0.5));
    CHECK(q.gamma_j_given_i == doctest::Approx(0.5));
    CHECK(quantile_indices(o, at(kW, 2.5, 2.0)).alpha_i == doctest::Approx(0.25));

    const PopulationOracle c(copula_cd3(0.5));
    ref::Copula rc;
    rc.rho = 0.5;
    const QuantileIndices qc = quantile_indices(c, at(kW, 2.7, 2.2));
    CHECK(std::abs(qc.gamma_i_given_j - qc.alpha_i) > 0.01);
    CHECK(std::abs(qc.gamma_i_given_j - rc.cond_cdf_a1(0.27, 0.44, 1'000'000, 29)) < 2e-3);
    CHECK(std::abs(qc.gamma_j_given_i - rc.cond_cdf_a2(0.44, 0.27, 1'000'000, 31)) < 2e-3);

    CHECK_THROWS_AS(quantile_indices(o, at(kW, 1.0, 2.0)), DomainError);
    SkewedProvider bad(o);
    CHECK_THROWS_AS(quantile_indices(bad, at(kW, 3.0, 2.0)), ProviderInconsistencyError);
}

TEST_CASE("frozen channel reproduces conditional expectations of structural derivatives") {
    for (double rho : {0.0, 0.5}) {
        const PopulationOracle o(copula_cd3(rho));
        for (const auto& pt : {at(kW, 3.0, 2.0), at(kW, 2.6, 2.3)}) {
            const QuantileIndices q = quantile_indices(o, pt);
            for (int s = 1; s <= 3; ++s) {
                const double rhs = lemma1_rhs(o, pt, s, q, ChannelMode::Frozen);
                const double lhs = o.conditional_expectation_partial(pt.w, s, g1, g2, pt.y_i, pt.y_j);
                CHECK(std::abs(lhs - rhs) <= 1e-3);
            }
        }
    }
    const PopulationOracle o(make_cd3());
    const auto pt = at(kW, 3.0, 2.0);
    const QuantileIndices q = quantile_indices(o, pt);
    CHECK(lemma1_rhs(o, pt, 1, q, ChannelMode::Frozen) == doctest::Approx(-3.0).epsilon(1e-4));
    CHECK(std::abs(lemma1_rhs(o, pt, 2, q, ChannelMode::Frozen)) < 1e-3);
}

TEST_CASE("observable channel collapses") {
    for (const auto& system : {make_cd3(), make_asym3(0.5), copula_cd3(0.5)}) {
        const PopulationOracle o(system);
        for (const auto& pt : default_points(o)) {
            const QuantileIndices q = quantile_indices(o, pt);
            for (int s = 1; s <= 3; ++s) CHECK(std::abs(lemma1_rhs(o, pt, s, q, ChannelMode::Observable)) < 1e-6);
            const SymmetryResidual r = symmetry_sides(o, pt, q, ChannelMode::Observable);
            CHECK(std::abs(r.lhs) < 1e-6);
            CHECK(std::abs(r.rhs) < 1e-6);
            CHECK(std::abs(correction_C(o, pt, q, ChannelMode::Observable)) < 1e-6);

            // D equals minus the w1 gradient of the conditional quantile.
            const DirectionTerms t = direction_terms(o, pt, q, ChannelMode::Observable);
            const CorrectionTerms c = correction_D(o, pt, q, ChannelMode::Observable);
            CHECK(std::abs(c.D[0] + t.partial_k_i[0]) < 1e-6);
            CHECK(std::abs(c.D[1] + t.partial_k_i[1]) < 1e-6);
            CHECK(std::abs(c.D_x + t.partial_k_i[2]) < 1e-6);
        }
    }
}

TEST_CASE("frozen corrections") {
    const PopulationOracle ind(make_cd3());
    const auto pt = at(kW, 3.0, 2.0);
    const QuantileIndices q = quantile_indices(ind, pt);
    CHECK(std::abs(correction_C(ind, pt, q, ChannelMode::Frozen)) < 1e-3);
    const CorrectionTerms c = correction_D(ind, pt, q, ChannelMode::Frozen);
    CHECK(c.D.norm() < 1e-3);
    CHECK(std::abs(c.D_x) < 1e-3);

    // Under dependence the frozen D terms carry the composition effect, while
    // C vanishes because y_j only enters through the conditioning event.
    const PopulationOracle cop(copula_cd3(0.5));
    const auto off = at(kW, 2.7, 2.2);
    const QuantileIndices qc = quantile_indices(cop, off);
    const CorrectionTerms cc = correction_D(cop, off, qc, ChannelMode::Frozen);
    CHECK(std::abs(cc.C) < 1e-3);
    CHECK(std::abs(cc.D[1]) > 0.01);

    // Reference for the p_2 component: the frozen CDF moves only through the
    // pinned a_2 = y_2 p_2 / x, so D_2 = -dP(a_1 <= t | a_2)/d a_2 * (y_2 / x) / f.
    ref::Copula rc;
    rc.rho = 0.5;
    const double t = 0.27, a2 = 0.44, h = 0.01;
    const double dF = ref::central([&](double v) { return rc.cond_cdf_a1(t, v, 2'000'000, 37); }, a2, h) * (2.2 / 10.0);
    const double f = cop.conditional_density(kW, g1, g2, 2.2, 2.7);
    CHECK(std::abs(cc.D[1] - dF / f) < 0.05 * std::abs(dF / f));
}

TEST_CASE("symmetry residuals") {
    for (double rho : {0.0, 0.5}) {
        const PopulationOracle o(copula_cd3(rho));
        for (const auto& pt : default_points(o)) {
            const SymmetryResidual r = symmetry_sides(o, pt, quantile_indices(o, pt), ChannelMode::Frozen);
            CHECK(std::abs(r.residual) <= 2e-3);
        }
    }
    const auto asym = make_asym3(0.5);
    const PopulationOracle o(asym);
    const auto pinned = at(kW, 4.0, 2.0);
    const SymmetryResidual r = symmetry_sides(o, pinned, quantile_indices(o, pinned), ChannelMode::Frozen);
    CHECK(std::abs(r.residual - 0.3) <= 5e-3);
    for (const auto& pt : default_points(o)) {
        const SymmetryResidual rp = symmetry_sides(o, pt, quantile_indices(o, pt), ChannelMode::Frozen);
        const double want = asym->slutsky_asymmetry(pt.w, asym->pin(pt.w, g1, pt.y_i, g2, pt.y_j), g1, g2);
        CHECK(std::abs(rp.residual - want) <= 5e-3);
    }
    // Exchanging the goods flips the sign.
    EvaluationPoint swapped = pinned;
    std::swap(swapped.i, swapped.j);
    std::swap(swapped.y_i, swapped.y_j);
    const SymmetryResidual rs = symmetry_sides(o, swapped, quantile_indices(o, swapped), ChannelMode::Frozen);
    CHECK(rs.residual == doctest::Approx(-r.residual).epsilon(1e-9));
}

TEST_CASE("frozen channel needs structural access") {
    Design d;
    d.prices = {Distribution::uniform(0.8, 1.2), Distribution::uniform(1.6, 2.4)};
    auto data = std::make_shared<const SimulatedDataset>(simulate_cross_section(*make_cd3(), d, 20'000, 1, false));
    KernelProviderSettings s;
    s.bandwidth_scale = 5.0;
    const KernelProvider kp(data, s);
    const auto pt = at(kW, kp.marginal_quantile(kW, g1, 0.5), kp.marginal_quantile(kW, g2, 0.5));
    const QuantileIndices q = quantile_indices(kp, pt);
    CHECK_THROWS_AS(symmetry_sides(kp, pt, q, ChannelMode::Frozen), StateError);
    CHECK_NOTHROW(symmetry_sides(kp, pt, q, ChannelMode::StableComposition));
}

TEST_CASE("welfare gap report") {
    const PopulationOracle ind(make_cd3());
    const HicksianGapReport g = hicksian_gap_report(ind, default_points(ind), ChannelMode::Frozen);
    REQUIRE(g.rows.size() == 9);
    for (const auto& row : g.rows) {
        CHECK(row.error.empty());
        CHECK(row.abs_C <= 2e-3);
        CHECK(row.norm_D <= 2e-3);
        CHECK(row.abs_D_x <= 2e-3);
    }
    const PopulationOracle cop(copula_cd3(0.5));
    const HicksianGapReport gc = hicksian_gap_report(cop, default_points(cop), ChannelMode::Frozen);
    CHECK(gc.D.max > 0.01);
    CHECK(hicksian_gap_report(ind, {}, ChannelMode::Frozen).rows.empty());
}
