#pragma once

#include "sslab/demand.hpp"
#include "sslab/estimator.hpp"
#include "sslab/symmetry.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sslab {

// levels x contexts x good pairs; each point sets y_i = k_{level,i}(w) and
// y_j = k_{level,j}(w).
struct GridDesign {
    std::vector<double> levels{0.25, 0.5, 0.75};
    std::vector<ContextPoint> contexts;
    std::vector<std::pair<int, int>> pairs{{1, 2}};
    double trim_lo = 0.1;
    double trim_hi = 0.9;

    void validate() const;
    nlohmann::json to_json() const;
    static GridDesign from_json(const nlohmann::json& j);
};

struct EvaluationGrid {
    std::vector<EvaluationPoint> points;
    std::vector<std::string> dropped; // one log line per dropped point
    double trim_lo = 0.1;
    double trim_hi = 0.9;
};

// Drops points where either conditional density is below the provider's
// floor (or the estimate is too sparse). Throws EstimationError when nothing
// is left.
EvaluationGrid build_grid(const QuantileProvider& provider, const GridDesign& design);

struct PointResult {
    std::optional<SymmetryResidual> residual;
    std::string error;
    bool ok() const { return residual.has_value(); }
};

// Per-point failures are recorded, not thrown. threads = 0 uses thread_count().
std::vector<PointResult> evaluate_residual_field(const QuantileProvider& provider,
                                                 const EvaluationGrid& grid, ChannelMode channel,
                                                 const std::optional<FdScheme>& scheme = std::nullopt,
                                                 bool all_corrections = true, int threads = 0);

// T = sum_k w_k r_k^2 with weights normalized over the finite residuals
// (NaN marks a failed point). Empty weights mean uniform.
double test_statistic(const std::vector<double>& residuals,
                      const std::vector<double>& weights = {});

struct BootstrapResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> replicates; // NaN for failed replicates
    std::vector<PointResult> field; // full-sample residual field
    std::size_t failed = 0;
};

// Row bootstrap through frequency weights. Replicate statistics are centered
// at the full-sample residuals; p = (1 + #{T_b >= T}) / (B_ok + 1).
BootstrapResult bootstrap_pvalue(const KernelProvider& provider, const EvaluationGrid& grid,
                                 ChannelMode channel, int B, std::uint64_t seed);

// Multinomial resample counts for replicate b.
std::vector<double> bootstrap_frequencies(std::size_t n, std::uint64_t seed, int b);

struct McConfig {
    std::vector<nlohmann::json> systems; // make_system specs
    std::vector<std::size_t> ns;
    std::size_t reps = 20;
    ChannelMode channel = ChannelMode::StableComposition;
    int B = 99;
    std::uint64_t seed = 1;
    Design design;
    bool endogenous = false;
    GridDesign grid;
    KernelProviderSettings estimator;
    double nominal = 0.05;
};

struct McReplicate {
    std::string system;
    std::size_t n = 0;
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    double statistic = 0.0;
    double p_value = 0.0;
    std::string error;
};

struct McCell {
    std::string system;
    std::size_t n = 0;
    ChannelMode channel = ChannelMode::StableComposition;
    std::size_t reps = 0;      // successful replications
    double reject_rate = 0.0;  // at the nominal level
    double mean_T = 0.0;
    double sd_T = 0.0;
    std::vector<std::string> errors;
};

struct McStudy {
    std::vector<McCell> cells;
    std::vector<McReplicate> replicates;
};

// Replication r uses derive_seed(seed, r) for every system, so cells with the
// same n are paired by seed.
McStudy monte_carlo_study(const McConfig& config);
void write_mc_csv(const McStudy& study, const std::string& path);

// One evaluated point under one channel, as persisted in reports.
struct ReportPoint {
    ContextPoint w;
    int i = 1;
    int j = 2;
    double y_i = 0.0;
    double y_j = 0.0;
    double level_i = 0.0;
    double level_j = 0.0;
    ChannelMode channel = ChannelMode::Frozen;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double C = 0.0;
    std::vector<double> D;
    double D_x = 0.0;
    std::string error;

    static ReportPoint from(const EvaluationPoint& pt, ChannelMode channel, const PointResult& r);
    friend bool operator==(const ReportPoint&, const ReportPoint&);
};

struct TestReport {
    nlohmann::json meta; // seed, config_hash, runtime_s, config
    std::vector<ReportPoint> points;
    double statistic = 0.0;
    std::vector<double> replicates;
    double p_value = 1.0;

    friend bool operator==(const TestReport&, const TestReport&);
};

nlohmann::json report_to_json(const TestReport& report);
// Throws ParseError naming the missing or malformed field.
TestReport report_from_json(const nlohmann::json& j);
void write_report(const TestReport& report, const std::string& path);
TestReport read_report(const std::string& path);
// point_id,level_i,level_j,residual,channel
void write_residual_csv(const TestReport& report, const std::string& path);

nlohmann::json context_to_json(const ContextPoint& w);
ContextPoint context_from_json(const nlohmann::json& j);

} // namespace sslab
