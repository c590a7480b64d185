#include "sslab/fd.hpp"

namespace sslab {

FdEstimate fd_partial_detail(const std::function<double(double)>& f, double t,
                             const FdScheme& scheme) {
    const double h = scheme.step_at(t);
    FdEstimate out;
    out.coarse = (f(t + h) - f(t - h)) / (2.0 * h);
    if (!scheme.richardson) {
        out.value = out.fine = out.coarse;
        return out;
    }
    const double h2 = 0.5 * h;
    out.fine = (f(t + h2) - f(t - h2)) / (2.0 * h2);
    out.value = out.fine + (out.fine - out.coarse) / 3.0;
    return out;
}

double fd_partial(const std::function<double(double)>& f, double t, const FdScheme& scheme) {
    return fd_partial_detail(f, t, scheme).value;
}

} // namespace sslab
