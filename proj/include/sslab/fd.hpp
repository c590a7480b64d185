#pragma once

#include "sslab/types.hpp"

#include <functional>

namespace sslab {

struct FdEstimate {
    double value = 0.0;  // Richardson-extrapolated when requested
    double coarse = 0.0; // central difference at h
    double fine = 0.0;   // central difference at h/2 (equals coarse without Richardson)
};

// Central difference of f at t with the scheme's step.
FdEstimate fd_partial_detail(const std::function<double(double)>& f, double t,
                             const FdScheme& scheme);
double fd_partial(const std::function<double(double)>& f, double t, const FdScheme& scheme);

} // namespace sslab
