#include "sslab/harness.hpp"
#include "sslab/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

using namespace sslab;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Design wide_design() {
    Design d;
    d.prices = {Distribution::uniform(0.8, 1.2), Distribution::uniform(1.6, 2.4)};
    d.income = Distribution::uniform(30.0, 50.0);
    return d;
}

GridDesign three_contexts() {
    GridDesign g;
    g.contexts = {ContextPoint::make({1.0, 2.0}, 40.0), ContextPoint::make({0.95, 2.05}, 38.0),
                  ContextPoint::make({1.05, 1.95}, 42.0)};
    return g;
}

KernelProviderSettings tuned() {
    KernelProviderSettings s;
    s.bandwidth_scale = 5.0;
    return s;
}

std::shared_ptr<const SimulatedDataset> sample(const std::shared_ptr<const DemandSystem>& sys,
                                               std::size_t n, std::uint64_t seed) {
    return std::make_shared<const SimulatedDataset>(simulate_cross_section(*sys, wide_design(), n, seed, false));
}

TestReport small_report() {
    TestReport r;
    r.meta = {{"seed", 7}, {"config_hash", "abc"}, {"runtime_s", 1.5}};
    ReportPoint a;
    a.w = ContextPoint::make({1.0, 2.0}, 40.0);
    a.y_i = 12.0;
    a.y_j = 8.0;
    a.level_i = a.level_j = 0.5;
    a.channel = ChannelMode::StableComposition;
    a.lhs = 0.1;
    a.rhs = 0.1 / 3.0;
    a.residual = a.lhs - a.rhs;
    a.C = 0.0;
    a.D = {1e-17, -0.25};
    a.D_x = 0.0;
    ReportPoint b = a;
    b.level_i = b.level_j = 0.75;
    b.lhs = b.rhs = b.residual = b.C = b.D_x = kNaN;
    b.D = {kNaN, kNaN};
    b.error = "sparse region";
    r.points = {a, b};
    r.statistic = 0.123456789012345678;
    r.replicates = {0.01, kNaN, 0.3};
    r.p_value = 0.1234567890123456789;
    return r;
}

} // namespace

TEST_CASE("grid construction") {
    const PopulationOracle o(make_cd3());
    const EvaluationGrid g = build_grid(o, three_contexts());
    CHECK(g.points.size() == 9);
    CHECK(g.dropped.empty());
    const auto& first = g.points.front();
    CHECK(first.y_i == doctest::Approx(o.marginal_quantile(first.w, first.i, first.level_i)));

    GridDesign bad = three_contexts();
    bad.levels = {0.05, 0.5};
    CHECK_THROWS_AS(build_grid(o, bad), ArgumentError);
    bad = three_contexts();
    bad.pairs = {{1, 1}};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);

    // A context far outside the sampled prices leaves nothing to evaluate.
    const KernelProvider kp(sample(make_cd3(), 20'000, 1), tuned());
    GridDesign far;
    far.contexts = {ContextPoint::make({3.0, 5.0}, 40.0)};
    CHECK_THROWS_AS(build_grid(kp, far), EstimationError);

    const GridDesign back = GridDesign::from_json(three_contexts().to_json());
    CHECK(back.to_json() == three_contexts().to_json());
}

TEST_CASE("test statistic") {
    CHECK(test_statistic({0.0, 0.0, 0.0}) == 0.0);
    CHECK(test_statistic({0.3}) == doctest::Approx(0.09));
    CHECK(test_statistic({0.3, 0.1}) == doctest::Approx(0.05));
    CHECK(test_statistic({0.3, 0.1}, {1.0, 3.0}) == doctest::Approx(0.25 * 0.09 + 0.75 * 0.01));
    CHECK(test_statistic({0.3, 0.1}, {2.0, 6.0}) == test_statistic({0.3, 0.1}, {1.0, 3.0}));
    // Failed points drop out and the remaining weights renormalize.
    CHECK(test_statistic({0.3, kNaN}) == doctest::Approx(0.09));
    CHECK_THROWS_AS(test_statistic({kNaN, kNaN}), EstimationError);
    CHECK_THROWS_AS(test_statistic({}), EstimationError);
    CHECK_THROWS_AS(test_statistic({0.1}, {1.0, 1.0}), ArgumentError);
}

TEST_CASE("bootstrap resample counts") {
    const auto f = bootstrap_frequencies(1000, 11, 3);
    double total = 0.0;
    for (double v : f) {
        CHECK(v >= 0.0);
        CHECK(v == std::floor(v));
        total += v;
    }
    CHECK(total == 1000.0);
    CHECK(f == bootstrap_frequencies(1000, 11, 3));
    CHECK(f != bootstrap_frequencies(1000, 11, 4));
}

TEST_CASE("bootstrap p-value") {
    const KernelProvider kp(sample(make_cd3(), 30'000, 2), tuned());
    const EvaluationGrid g = build_grid(kp, three_contexts());
    const int B = 19;
    const BootstrapResult r = bootstrap_pvalue(kp, g, ChannelMode::StableComposition, B, 5);
    REQUIRE(r.replicates.size() == static_cast<std::size_t>(B));
    CHECK(r.p_value >= 1.0 / (B + 1));
    CHECK(r.p_value <= 1.0);

    std::size_t ok = 0, exceed = 0;
    for (double t : r.replicates)
        if (std::isfinite(t)) {
            ++ok;
            exceed += t >= r.statistic ? 1 : 0;
        }
    CHECK(ok + r.failed == static_cast<std::size_t>(B));
    CHECK(r.p_value == doctest::Approx((1.0 + exceed) / (ok + 1.0)));

    std::vector<double> res;
    for (const auto& p : r.field) res.push_back(p.ok() ? p.residual->residual : kNaN);
    CHECK(r.statistic == test_statistic(res));

    const BootstrapResult again = bootstrap_pvalue(kp, g, ChannelMode::StableComposition, B, 5);
    CHECK(again.p_value == r.p_value);
    CHECK(again.statistic == r.statistic);

    CHECK_THROWS_AS(bootstrap_pvalue(kp, g, ChannelMode::StableComposition, 18, 5), ArgumentError);
}

TEST_CASE("results do not depend on the thread count") {
    const KernelProvider kp(sample(make_asym3(1.0), 30'000, 3), tuned());
    const EvaluationGrid g = build_grid(kp, three_contexts());
    const auto one = evaluate_residual_field(kp, g, ChannelMode::StableComposition, std::nullopt, true, 1);
    const auto four = evaluate_residual_field(kp, g, ChannelMode::StableComposition, std::nullopt, true, 4);
    REQUIRE(one.size() == four.size());
    for (std::size_t k = 0; k < one.size(); ++k) {
        REQUIRE(one[k].ok() == four[k].ok());
        if (!one[k].ok()) continue;
        CHECK(one[k].residual->residual == four[k].residual->residual);
        CHECK(one[k].residual->lhs == four[k].residual->lhs);
    }

    setenv("SSLAB_THREADS", "1", 1);
    const BootstrapResult a = bootstrap_pvalue(kp, g, ChannelMode::StableComposition, 19, 9);
    setenv("SSLAB_THREADS", "3", 1);
    const BootstrapResult b = bootstrap_pvalue(kp, g, ChannelMode::StableComposition, 19, 9);
    unsetenv("SSLAB_THREADS");
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
    for (std::size_t k = 0; k < a.replicates.size(); ++k)
        CHECK((a.replicates[k] == b.replicates[k] || (std::isnan(a.replicates[k]) && std::isnan(b.replicates[k]))));
}

TEST_CASE("report round trip") {
    const TestReport r = small_report();
    const std::string text = report_to_json(r).dump(2);
    const TestReport back = report_from_json(nlohmann::json::parse(text));
    CHECK(back == r);
    CHECK(back.p_value == r.p_value);
    CHECK(std::isnan(back.points[1].residual));
    CHECK(back.points[1].error == "sparse region");

    const std::string path = "harness_report_test.json";
    write_report(r, path);
    CHECK(read_report(path) == r);
    std::remove(path.c_str());

    nlohmann::json broken = report_to_json(r);
    broken["points"][1].erase("lhs");
    try {
        report_from_json(broken);
        FAIL("missing field accepted");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("lhs") != std::string::npos);
        CHECK(msg.find("points[1]") != std::string::npos);
    }
    nlohmann::json no_meta = report_to_json(r);
    no_meta["meta"].erase("config_hash");
    CHECK_THROWS_AS(report_from_json(no_meta), ParseError);
}

TEST_CASE("residual csv") {
    const std::string path = "harness_residuals_test.csv";
    write_residual_csv(small_report(), path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "point_id,level_i,level_j,residual,channel");
    std::size_t rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 2);
    std::remove(path.c_str());
}

TEST_CASE("Monte Carlo study") {
    McConfig c;
    c.systems = {{{"name", "CD3"}}, {{"name", "ASYM3"}, {"c", 1.0}}};
    c.ns = {20'000};
    c.reps = 2;
    c.B = 19;
    c.seed = 4;
    c.design = wide_design();
    c.grid = three_contexts();
    c.estimator = tuned();
    const McStudy s = monte_carlo_study(c);
    REQUIRE(s.cells.size() == 2);
    REQUIRE(s.replicates.size() == 4);
    // Paired by seed across systems.
    CHECK(s.replicates[0].seed == s.replicates[2].seed);
    CHECK(s.replicates[1].seed == s.replicates[3].seed);
    CHECK(s.replicates[0].seed != s.replicates[1].seed);
    for (const auto& cell : s.cells) {
        CHECK(cell.reject_rate >= 0.0);
        CHECK(cell.reject_rate <= 1.0);
        CHECK(cell.reps + cell.errors.size() == 2);
    }

    const std::string path = "harness_mc_test.csv";
    write_mc_csv(s, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "system,n,channel,reps,reject_rate_5pct,mean_T,sd_T");
    std::remove(path.c_str());

    c.reps = 0;
    CHECK_THROWS_AS(monte_carlo_study(c), ArgumentError);
}
