#pragma once

#include "sslab/provider.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sslab {

// A point (w*, y_i*, y_j*) at which the symmetry restriction for the pair
// (i, j) is evaluated. level_i/level_j record the marginal levels used to
// build the point (NaN when not built from levels).
struct EvaluationPoint {
    ContextPoint w;
    GoodIndex i{1};
    GoodIndex j{2};
    double y_i = 0.0;
    double y_j = 0.0;
    double level_i = std::numeric_limits<double>::quiet_NaN();
    double level_j = std::numeric_limits<double>::quiet_NaN();
};

struct QuantileIndices {
    double alpha_i = 0.0;         // F_{Y_i|W}(y_i*)
    double alpha_j = 0.0;         // F_{Y_j|W}(y_j*)
    double gamma_i_given_j = 0.0; // F_{Y_i|W,Y_j=y_j*}(y_i*)
    double gamma_j_given_i = 0.0; // F_{Y_j|W,Y_i=y_i*}(y_j*)
};

// Throws ProviderInconsistencyError when the provider's quantiles at the
// indices miss (y_i*, y_j*) by more than its round-trip tolerance.
QuantileIndices quantile_indices(const QuantileProvider& provider, const EvaluationPoint& pt);

// Corrections for the i-given-j direction at a point.
struct CorrectionTerms {
    double C = 0.0;
    Vec D;            // one entry per price coordinate
    double D_x = 0.0; // income coordinate
    ChannelMode channel = ChannelMode::Frozen;
    double density = 0.0; // conditional density of Y_i used as denominator
};

// Derivative pieces of the identification formula for the direction i|j.
struct DirectionTerms {
    Vec partial_k_i;      // d/dw1_s of the conditional quantile at fixed conditioning value
    Vec partial_k_j;      // d/dw1_s of the marginal quantile of the conditioning good
    double partial2_k_i = 0.0; // d/dy_j of the conditional quantile
    Vec partial_F;        // channel-specific d/dw1_s of the conditional CDF
    double partial2_F = 0.0; // channel-specific d/dy_j of the conditional CDF
    double density = 0.0;
    ChannelMode channel = ChannelMode::Frozen;

    double C() const { return partial2_k_i + partial2_F / density; }
    double D(int s) const { return partial_F[s - 1] / density; }
    // Right side of the identification formula for derivative index s.
    double lemma(int s) const { return partial_k_i[s - 1] + partial_k_j[s - 1] * C() + D(s); }
};

// Evaluates the pieces for the derivative indices in `which` (1..L; entries
// for other indices are NaN). Empty `which` means all indices.
DirectionTerms direction_terms(const QuantileProvider& provider, const EvaluationPoint& pt,
                               const QuantileIndices& indices, ChannelMode channel,
                               const std::vector<int>& which = {},
                               const std::optional<FdScheme>& scheme = std::nullopt);

double lemma1_rhs(const QuantileProvider& provider, const EvaluationPoint& pt, int s,
                  const QuantileIndices& indices, ChannelMode channel,
                  const std::optional<FdScheme>& scheme = std::nullopt);
double correction_C(const QuantileProvider& provider, const EvaluationPoint& pt,
                    const QuantileIndices& indices, ChannelMode channel,
                    const std::optional<FdScheme>& scheme = std::nullopt);
CorrectionTerms correction_D(const QuantileProvider& provider, const EvaluationPoint& pt,
                             const QuantileIndices& indices, ChannelMode channel,
                             const std::optional<FdScheme>& scheme = std::nullopt);

struct SymmetryResidual {
    EvaluationPoint point;
    QuantileIndices indices;
    ChannelMode channel = ChannelMode::Frozen;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0; // lhs - rhs
    CorrectionTerms corrections; // i-given-j direction
};

// lhs: price-j and income responses in the i-given-j direction; rhs: the same
// with the roles of i and j exchanged.
// With all_corrections false only the D entries the sides need are filled
// (the others are NaN), which saves work inside bootstrap loops.
SymmetryResidual symmetry_sides(const QuantileProvider& provider, const EvaluationPoint& pt,
                                const QuantileIndices& indices, ChannelMode channel,
                                const std::optional<FdScheme>& scheme = std::nullopt,
                                bool all_corrections = true);

struct GapRow {
    EvaluationPoint point;
    double abs_C = 0.0;
    double norm_D = 0.0;
    double abs_D_x = 0.0;
    bool material = false;
    std::string error; // nonempty when the point failed
};

struct GapSummary {
    double median = 0.0;
    double q90 = 0.0;
    double max = 0.0;
};

struct HicksianGapReport {
    std::vector<GapRow> rows;
    GapSummary C, D, D_x;
    ChannelMode channel = ChannelMode::Frozen;
    double materiality = 0.0;
};

HicksianGapReport hicksian_gap_report(const QuantileProvider& provider,
                                      const std::vector<EvaluationPoint>& points,
                                      ChannelMode channel, double materiality = 0.01,
                                      const std::optional<FdScheme>& scheme = std::nullopt);

} // namespace sslab
