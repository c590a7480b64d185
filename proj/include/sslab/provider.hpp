#pragma once

#include "sslab/types.hpp"

namespace sslab {

// Source of the observable quantile objects used by the symmetry engine:
// marginal and conditional CDFs, densities and quantiles of Y given W = w
// (and Y_j = y_j). Implemented by the population oracle and by the kernel
// estimator. Implementations are read-only after construction.
class QuantileProvider {
public:
    virtual ~QuantileProvider() = default;

    virtual int num_inside_goods() const = 0;

    virtual double marginal_cdf(const ContextPoint& w, GoodIndex i, double y) const = 0;
    virtual double marginal_quantile(const ContextPoint& w, GoodIndex i, double level) const = 0;

    // P(Y_i <= y_i | W = w, Y_j = y_j).
    virtual double conditional_cdf(const ContextPoint& w, GoodIndex i, GoodIndex j, double y_j,
                                   double y_i) const = 0;
    // Throws DegeneracyError when the density falls below density_floor().
    virtual double conditional_density(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                       double y_j, double y_i) const = 0;
    virtual double conditional_quantile(const ContextPoint& w, GoodIndex i, GoodIndex j,
                                        double y_j, double level) const = 0;

    // P(phi_i(w_struct, A) <= y_i | phi_j(w_cond, A) = y_j). Needs the
    // structural function; providers without it throw StateError.
    virtual bool supports_two_context() const { return false; }
    virtual double two_context_conditional_cdf(const ContextPoint& w_struct,
                                               const ContextPoint& w_cond, GoodIndex i,
                                               GoodIndex j, double y_j, double y_i) const;

    // Step rule for differentiating this provider's objects along c.
    virtual FdScheme fd_scheme(Coordinate c) const = 0;
    // Allowed |k(F(y)) - y| / max(1, |y|) in quantile round-trip checks.
    virtual double round_trip_tolerance() const = 0;
    virtual double density_floor() const = 0;
};

} // namespace sslab
