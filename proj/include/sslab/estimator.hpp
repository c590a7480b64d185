#pragma once

#include "sslab/demand.hpp"
#include "sslab/kernel.hpp"
#include "sslab/provider.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sslab {

// Names of the conditioning coordinates: "p1".., "x", "q1".., "v" for the
// context and "y1".. for a conditioning demand value.
struct BandwidthProfile {
    std::vector<std::string> names;
    std::vector<double> h;
    double outcome = 0.0; // smoothing in the outcome direction

    double at(const std::string& name) const;
    void validate() const;
};

// Rule of thumb 1.06 * sd * n^(-1/(4+d)) for each named coordinate with
// d = names.size(); the outcome bandwidth uses d+1 and the spread of
// `outcome_good`'s demand. Throws DegeneracyError for a constant coordinate.
BandwidthProfile select_bandwidths(const SimulatedDataset& data,
                                   const std::vector<std::string>& coordinates,
                                   GoodIndex outcome_good = GoodIndex(1));

// Context coordinate names used for W: prices, income, characteristics with
// positive variance, and "v" when the dataset carries control residuals.
std::vector<std::string> context_coordinates(const SimulatedDataset& data, bool use_control);

struct CurveOnGrid {
    std::vector<double> grid;   // strictly increasing
    std::vector<double> values;
    void validate() const;
};

CurveOnGrid monotone_rearrange(CurveOnGrid curve);
// Linear interpolation of the inverse; left-most crossing on flat stretches.
// Throws DomainError when the level is outside the curve's range.
double invert_cdf(const CurveOnGrid& curve, double level);

struct EstimatorOptions {
    double min_effective = 50.0; // sum of weights over the largest weight
    double density_floor = kDefaultDensityFloor;
    int grid_points = 401;
    double grid_expansion = 0.05;
};

struct DensityEstimate {
    double value = 0.0;   // floored at density_floor
    double raw = 0.0;
    bool floored = false;
};

// Nadaraya-Watson smoothing of Y_i given W = w (and Y_j = y_j) with product
// biweight weights. Rows may carry frequency weights (bootstrap resamples).
class KernelEstimator {
public:
    // `coordinates` lists the context coordinates conditioned on (see
    // context_coordinates). Frequencies, when given, have one entry per row.
    KernelEstimator(std::shared_ptr<const SimulatedDataset> data,
                    std::vector<std::string> coordinates, EstimatorOptions options = {},
                    std::shared_ptr<const std::vector<double>> frequencies = nullptr);

    // Same data and layout, different row frequencies.
    KernelEstimator with_frequencies(std::shared_ptr<const std::vector<double>> frequencies) const;

    const SimulatedDataset& data() const { return *data_; }
    std::shared_ptr<const SimulatedDataset> shared_data() const { return data_; }
    const std::vector<std::string>& coordinates() const { return coords_; }
    const EstimatorOptions& options() const { return options_; }

    // Default outcome grid: grid_points equally spaced over the sample range
    // of Y_i expanded by grid_expansion on each side.
    std::vector<double> default_grid(GoodIndex i) const;

    struct Conditioning {
        GoodIndex j;
        double y_j;
    };

    // Raw curve of P(Y_i <= y | ...) on `grid`. The profile must name every
    // context coordinate plus "y<j>" when conditioning on a demand value.
    CurveOnGrid cdf_curve(const ContextPoint& w, GoodIndex i, std::optional<Conditioning> cond,
                          const std::vector<double>& grid, const BandwidthProfile& bw) const;
    double cdf_at(const ContextPoint& w, GoodIndex i, std::optional<Conditioning> cond, double y,
                  const BandwidthProfile& bw) const;
    DensityEstimate density_at(const ContextPoint& w, GoodIndex i,
                               std::optional<Conditioning> cond, double y,
                               const BandwidthProfile& bw) const;

private:
    struct Weights {
        std::vector<double> y; // outcome values of the weighted rows
        std::vector<double> w;
        double total = 0.0;
    };
    Weights weights(const ContextPoint& w, GoodIndex i, std::optional<Conditioning> cond,
                    const BandwidthProfile& bw) const;
    double context_value(const ContextPoint& w, std::size_t k) const;

public:
    // Rows with positive product kernel over the context coordinates.
    struct ContextKernel {
        std::vector<std::uint32_t> rows;
        std::vector<double> k;
        std::vector<std::vector<double>> y; // per good, aligned with rows
    };

private:
    std::shared_ptr<const ContextKernel> context_kernel(const std::vector<double>& center,
                                                       const std::vector<double>& h) const;

    struct Layout {
        std::uint64_t id = 0; // unique per construction; keys the context cache
        std::vector<double> columns; // n x d, row-major context coordinates
        kernel::GridIndex index;
    };

    std::shared_ptr<const SimulatedDataset> data_;
    std::vector<std::string> coords_;
    EstimatorOptions options_;
    std::shared_ptr<const std::vector<double>> freq_;
    std::shared_ptr<const Layout> layout_;
};

// Free-function forms.
CurveOnGrid estimate_conditional_cdf(const SimulatedDataset& data, const ContextPoint& w,
                                     GoodIndex i,
                                     std::optional<KernelEstimator::Conditioning> cond,
                                     const std::vector<double>& grid, const BandwidthProfile& bw,
                                     const EstimatorOptions& options = {});
DensityEstimate estimate_conditional_density(const SimulatedDataset& data, const ContextPoint& w,
                                             GoodIndex i,
                                             std::optional<KernelEstimator::Conditioning> cond,
                                             double y, const BandwidthProfile& bw,
                                             const EstimatorOptions& options = {});

struct KernelProviderSettings {
    double bandwidth_scale = 1.0;                // multiplies the conditioning bandwidths
    double outcome_scale = 1.0;                  // multiplies the outcome bandwidth
    std::map<std::string, double> overrides;     // absolute bandwidths by coordinate name or "outcome"
    double fd_fraction = 0.5;                    // FD step as a fraction of the coordinate bandwidth
    bool use_control = true;                     // condition on v_hat when present
    EstimatorOptions estimator{};
    double round_trip_tolerance = 0.02;
};

// Bandwidths and outcome grids fixed on the original sample and reused by
// bootstrap resamples. Scale and overrides are already applied.
struct KernelCalibration {
    std::vector<std::string> coordinates;                 // context coordinates
    std::vector<BandwidthProfile> marginal;               // per outcome good i
    std::vector<std::vector<BandwidthProfile>> conditional; // [i][j], conditioning on y_j
    std::vector<std::vector<double>> grids;               // per outcome good
};

KernelCalibration calibrate(const SimulatedDataset& data, const KernelProviderSettings& settings);

// QuantileProvider backed by kernel estimates. Derivatives use plain central
// differences with steps tied to the bandwidths. No two-context access.
class KernelProvider final : public QuantileProvider {
public:
    KernelProvider(std::shared_ptr<const SimulatedDataset> data, KernelProviderSettings settings = {},
                   std::shared_ptr<const KernelCalibration> calibration = nullptr,
                   std::shared_ptr<const std::vector<double>> frequencies = nullptr);

    // Bootstrap resample: same data, layout and calibration, new row frequencies.
    KernelProvider resampled(std::shared_ptr<const std::vector<double>> frequencies) const;
    const KernelProviderSettings& settings() const { return settings_; }

    const KernelCalibration& calibration() const { return *cal_; }
    std::shared_ptr<const KernelCalibration> shared_calibration() const { return cal_; }
    const KernelEstimator& estimator() const { return est_; }

    int num_inside_goods() const override { return est_.data().num_inside_goods(); }
    double marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const override;
    double marginal_quantile(const ContextPoint& w, GoodIndex i, double level) const override;
    double conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                           double y_i) const override;
    double conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                               double y_i) const override;
    double conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                                double level) const override;
    FdScheme fd_scheme(Coordinate c) const override;
    double round_trip_tolerance() const override { return settings_.round_trip_tolerance; }
    double density_floor() const override { return settings_.estimator.density_floor; }

    const BandwidthProfile& profile(GoodIndex i, std::optional<GoodIndex> j) const;

private:
    KernelProvider(KernelProviderSettings settings, std::shared_ptr<const KernelCalibration> cal,
                   KernelEstimator est);

    KernelProviderSettings settings_;
    std::shared_ptr<const KernelCalibration> cal_;
    KernelEstimator est_;
};

// What estimate_partial differentiates.
struct EstimateTarget {
    enum class Kind { MarginalCdf, MarginalQuantile, ConditionalCdf, ConditionalQuantile,
                      ConditionalDensity };
    Kind kind = Kind::MarginalQuantile;
    GoodIndex i{1};
    GoodIndex j{2};
    double y_j = 0.0;   // conditioning value (conditional kinds)
    double value = 0.0; // CDF/density evaluation point, or quantile level
    double scale = 1.0; // the target is scale * object
};

double evaluate_target(const QuantileProvider& provider, const ContextPoint& w,
                       const EstimateTarget& target);
// Central difference of the target along `coordinate` (a w1 coordinate or the
// conditioning value) with identical data and bandwidths.
double estimate_partial(const QuantileProvider& provider, const EstimateTarget& target,
                        const ContextPoint& w, Coordinate coordinate, const FdScheme& scheme);

} // namespace sslab
