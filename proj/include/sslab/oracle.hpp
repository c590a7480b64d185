#pragma once

#include "sslab/demand.hpp"
#include "sslab/provider.hpp"

#include <functional>
#include <memory>
#include <mutex>

namespace sslab {

enum class Integration { Quadrature, MonteCarlo };

struct OracleSettings {
    Integration integration = Integration::Quadrature;
    std::size_t draws = 1'000'000; // Monte Carlo budget, shared by every query (common random numbers)
    std::uint64_t seed = 1;
    // Monte Carlo outcome indicator is smoothed with the integrated biweight at
    // this fraction of the outcome's spread (image width / sqrt 12), so that FD
    // derivatives of Monte Carlo CDFs are well defined.
    double outcome_smoothing = 0.01;
    // Kernel conditioning bandwidth, as a fraction of the spread of Y_j, for
    // systems whose conditioning good is not monotone in its own share.
    double conditioning_bandwidth = 0.05;
    // Use kernel conditioning even where the conditioning value pins a_j.
    bool force_smoothed_conditioning = false;
    FdScheme scheme{};
    double density_floor = kDefaultDensityFloor;
    double round_trip_tolerance = 1e-6;
};

// Values of a smoothed-conditioning query at bandwidths b/2, b, 2b.
struct BandwidthSensitivity {
    double half = 0.0;
    double base = 0.0;
    double twice = 0.0;
    double bandwidth = 0.0;
};

// Population quantile objects computed by integrating over the known
// heterogeneity law of a demand system.
class PopulationOracle final : public QuantileProvider {
public:
    explicit PopulationOracle(std::shared_ptr<const DemandSystem> system,
                              OracleSettings settings = {});
    ~PopulationOracle() override;

    const DemandSystem& system() const { return *system_; }
    const OracleSettings& settings() const { return settings_; }

    int num_inside_goods() const override { return system_->num_inside_goods(); }
    double marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const override;
    double marginal_quantile(const ContextPoint& w, GoodIndex i, double level) const override;
    double conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                           double y_i) const override;
    double conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                               double y_i) const override;
    double conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                                double level) const override;
    bool supports_two_context() const override { return true; }
    double two_context_conditional_cdf(const ContextPoint& w_struct, const ContextPoint& w_cond,
                                       GoodIndex i, GoodIndex j, double y_j,
                                       double y_i) const override;
    FdScheme fd_scheme(Coordinate) const override { return settings_.scheme; }
    double round_trip_tolerance() const override { return settings_.round_trip_tolerance; }
    double density_floor() const override { return settings_.density_floor; }

    // True when conditioning on good j goes through kernel smoothing (and is
    // therefore approximate) instead of pinning a_j.
    bool conditioning_is_approximate(GoodIndex j) const;

    BandwidthSensitivity conditioning_sensitivity(const ContextPoint& w_struct,
                                                  const ContextPoint& w_cond, GoodIndex i,
                                                  GoodIndex j, double y_j, double y_i) const;

    // E[d phi_i / d w1_s | W = w, Y_i = y_i, Y_j = y_j], s in 1..L (prices, then income).
    double conditional_expectation_partial(const ContextPoint& w, int s, GoodIndex i, GoodIndex j,
                                           double y_i, double y_j) const;

private:
    struct Draws;
    const Draws& draws() const;
    double smoothed_two_context(const ContextPoint& w_struct, const ContextPoint& w_cond,
                                GoodIndex i, GoodIndex j, double y_j, double y_i,
                                double bandwidth_factor) const;
    double bisect(const std::function<double(double)>& cdf, std::pair<double, double> image,
                  double level, const char* what) const;
    void check_goods(GoodIndex i, GoodIndex j) const;

    std::shared_ptr<const DemandSystem> system_;
    OracleSettings settings_;
    mutable std::once_flag draws_once_;
    mutable std::unique_ptr<Draws> draws_;
};

} // namespace sslab
