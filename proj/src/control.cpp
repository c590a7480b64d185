#include "sslab/demand.hpp"
#include "sslab/errors.hpp"
#include "sslab/kernel.hpp"
#include "sslab/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace sslab {

namespace {

double sample_sd(std::span<const double> v) {
    const auto n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double t : v) mean += t;
    mean /= n;
    double ss = 0.0;
    for (double t : v) ss += (t - mean) * (t - mean);
    return std::sqrt(ss / std::max(1.0, n - 1.0));
}

} // namespace

SimulatedDataset control_residuals(const SimulatedDataset& data, ControlMode mode) {
    if (!data.meta.endogenous)
        throw StateError("control residuals need a dataset simulated in endogenous mode");
    SimulatedDataset out = data;
    if (mode == ControlMode::TrueV) {
        out.v_hat = data.v_true;
        return out;
    }
    const std::size_t n = data.size();
    if (n < 2) throw EstimationError("control regression needs at least 2 rows");

    // Regressors (P, Q, S); constant columns carry no information and are dropped.
    std::vector<Vec> raw;
    for (int k = 0; k < data.p.cols(); ++k) raw.emplace_back(data.p.col(k));
    for (int k = 0; k < data.q.cols(); ++k) raw.emplace_back(data.q.col(k));
    raw.emplace_back(data.s);
    std::vector<Vec> cols;
    std::vector<double> sd;
    for (auto& c : raw) {
        const double s = sample_sd({c.data(), static_cast<std::size_t>(c.size())});
        if (s > 0.0) {
            cols.push_back(std::move(c));
            sd.push_back(s);
        }
    }
    Vec fit(static_cast<Eigen::Index>(n));
    if (cols.empty()) {
        fit.setConstant(data.x.mean());
        out.v_hat = data.x - fit;
        return out;
    }

    const std::size_t d = cols.size();
    const double shrink = std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(d)));
    std::vector<double> h(d);
    std::vector<std::span<const double>> spans;
    for (std::size_t k = 0; k < d; ++k) {
        h[k] = 1.06 * sd[k] * shrink;
        spans.emplace_back(cols[k].data(), n);
    }
    const kernel::GridIndex index(spans, h);
    const auto m = static_cast<Eigen::Index>(d + 1);

    parallel_for(n, [&](std::size_t r) {
        std::vector<double> center(d), radius(h);
        for (std::size_t k = 0; k < d; ++k) center[k] = cols[k][static_cast<Eigen::Index>(r)];
        // Widen the window for isolated rows until the local design is full rank.
        for (int attempt = 0; attempt < 6; ++attempt) {
            Mat xtx = Mat::Zero(m, m);
            Vec xty = Vec::Zero(m);
            Vec z(m);
            double total = 0.0;
            index.for_each_candidate(center, radius, [&](std::uint32_t row) {
                double w = 1.0;
                z[0] = 1.0;
                for (std::size_t k = 0; k < d && w > 0.0; ++k) {
                    const double u = cols[k][row] - center[k];
                    w *= kernel::biweight_weight(u / radius[k]);
                    z[static_cast<Eigen::Index>(k) + 1] = u / radius[k];
                }
                if (w <= 0.0) return;
                total += w;
                xtx.noalias() += w * z * z.transpose();
                xty.noalias() += w * data.x[row] * z;
            });
            if (total > 0.0) {
                Eigen::LDLT<Mat> ldlt(xtx);
                const double scale = xtx.diagonal().maxCoeff();
                if (ldlt.info() == Eigen::Success &&
                    ldlt.vectorD().cwiseAbs().minCoeff() > 1e-10 * scale) {
                    fit[static_cast<Eigen::Index>(r)] = ldlt.solve(xty)[0];
                    return;
                }
            }
            for (auto& t : radius) t *= 1.5;
        }
        throw EstimationError("control regression is singular near row " + std::to_string(r));
    });
    out.v_hat = data.x - fit;
    return out;
}

} // namespace sslab
