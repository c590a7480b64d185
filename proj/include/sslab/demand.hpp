#pragma once

#include "sslab/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sslab {

// Preference draw a. For the built-in systems a = (a_1, a_2) are budget shares.
struct HeterogeneityDraw {
    Vec a;
};

// Law of A given Z = (Q, V): Gaussian copula with uniform marginals.
//
// Latent scores z_k = m + s * e_k with corr(e_1, e_2) = rho, and
// a_k = lo_k + (hi_k - lo_k) * Phi(z_k). When V = v is conditioned on,
// m = lambda * v / sd_v and s = sqrt(1 - lambda^2) (shared latent factor);
// otherwise m = 0 and s = 1, so each a_k is Uniform(lo_k, hi_k).
// lo_k == hi_k gives a point mass.
struct ShareLaw {
    std::vector<double> lo{0.2, 0.3};
    std::vector<double> hi{0.4, 0.5};
    double rho = 0.0;
    double lambda = 0.0;
    double v_sd = 0.5; // sd of the first-stage residual V (variance 0.25)

    int dim() const { return static_cast<int>(lo.size()); }
    void validate() const;
    bool degenerate(int k) const { return hi[k] <= lo[k]; }
    double max_share_sum() const;

    struct Latent {
        double mean = 0.0;
        double sd = 1.0;
    };
    Latent latent(const std::optional<double>& v) const;

    // a_k from a standard-normal innovation e_k.
    double share_from_latent(int k, double z) const;
    // Inverse of share_from_latent on the open support.
    double latent_from_share(int k, double a) const;

    // P(a_k <= t | V = v).
    double cdf(int k, double t, const std::optional<double>& v) const;
    double quantile(int k, double level, const std::optional<double>& v) const;
    // P(a_i <= t | a_j = given, V = v).
    double conditional_cdf(int i, double t, int j, double given,
                           const std::optional<double>& v) const;

    // i.i.d. draws reproducible in (seed, index). With v_per_draw non-null,
    // draw k conditions on V = v_per_draw[k].
    std::vector<HeterogeneityDraw> sample(std::size_t n, std::uint64_t seed,
                                          const std::vector<double>* v_per_draw = nullptr) const;
    HeterogeneityDraw draw(std::uint64_t seed, std::uint64_t index,
                           const std::optional<double>& v) const;
    // Correlated standard normal innovations (e_1, e_2) for draw `index`.
    std::pair<double, double> innovations(std::uint64_t seed, std::uint64_t index) const;

    nlohmann::json to_json() const;
    static ShareLaw from_json(const nlohmann::json& j);
};

// Analytic Spearman rank correlation of a Gaussian copula.
double gaussian_copula_spearman(double rho);

struct DemandDerivatives {
    Mat price_jacobian; // (L-1)x(L-1), row = good, column = price
    Vec income;         // d y / d x
};

// Structural demand y = phi(p, x, q, a) over L-1 inside goods.
class DemandSystem {
public:
    virtual ~DemandSystem() = default;

    virtual std::string name() const = 0;
    virtual int num_goods() const = 0; // L, including the numeraire
    int num_inside_goods() const { return num_goods() - 1; }
    virtual const ShareLaw& law() const = 0;

    virtual Vec demand(const ContextPoint& w, const HeterogeneityDraw& a) const = 0;
    virtual DemandDerivatives derivatives(const ContextPoint& w,
                                          const HeterogeneityDraw& a) const = 0;

    // e_k'phi strictly monotone in a_k and free of the other components.
    virtual bool monotone(GoodIndex k) const = 0;
    // Conditioning on (Y_i, Y_j) at a context pins a.
    virtual bool invertible() const = 0;

    // Share a_k solving e_k'phi(w, a) = y (requires monotone(k)). The result
    // is not clipped to the law's support.
    virtual double invert_good(const ContextPoint& w, GoodIndex k, double y) const = 0;
    // Image of e_k'phi(w, .) over the law's support for a_k.
    virtual std::pair<double, double> image(const ContextPoint& w, GoodIndex k) const = 0;

    // Throws DomainError unless w has positive prices and income and at least
    // the lowest-share draw of the law is budget feasible at w.
    virtual void check_context(const ContextPoint& w) const = 0;
    // Stronger: every draw of the law is budget feasible at w.
    virtual void check_all_draws_feasible(const ContextPoint& w) const = 0;

    virtual nlohmann::json to_json() const = 0;

    Mat slutsky(const ContextPoint& w, const HeterogeneityDraw& a) const;
    // e_i'S e_j - e_j'S e_i
    double slutsky_asymmetry(const ContextPoint& w, const HeterogeneityDraw& a, GoodIndex i,
                             GoodIndex j) const;
    // The draw pinned by (Y_i, Y_j) = (y_i, y_j) at w (requires invertible()).
    HeterogeneityDraw pin(const ContextPoint& w, GoodIndex i, double y_i, GoodIndex j,
                          double y_j) const;
};

// Cobb-Douglas shares on two inside goods plus a numeraire, with an optional
// non-integrable cross-price term: y_1 = a_1 x/p_1 + c p_2, y_2 = a_2 x/p_2.
// c = 0 is the rational CD3 system, c != 0 is ASYM3.
class ShareDemandSystem final : public DemandSystem {
public:
    ShareDemandSystem(std::string name, double cross_price, ShareLaw law);

    std::string name() const override { return name_; }
    int num_goods() const override { return 3; }
    const ShareLaw& law() const override { return law_; }
    double cross_price() const { return c_; }

    Vec demand(const ContextPoint& w, const HeterogeneityDraw& a) const override;
    DemandDerivatives derivatives(const ContextPoint& w,
                                  const HeterogeneityDraw& a) const override;
    bool monotone(GoodIndex) const override { return true; }
    bool invertible() const override { return true; }
    double invert_good(const ContextPoint& w, GoodIndex k, double y) const override;
    std::pair<double, double> image(const ContextPoint& w, GoodIndex k) const override;
    void check_context(const ContextPoint& w) const override;
    void check_all_draws_feasible(const ContextPoint& w) const override;
    nlohmann::json to_json() const override;

private:
    void check_draw(const ContextPoint& w, const HeterogeneityDraw& a) const;

    std::string name_;
    double c_;
    ShareLaw law_;
};

std::shared_ptr<const DemandSystem> make_cd3(ShareLaw law = {});
std::shared_ptr<const DemandSystem> make_asym3(double c, ShareLaw law = {});
// {"name": "CD3"|"ASYM3", "c": ..., "law": {...}}
std::shared_ptr<const DemandSystem> make_system(const nlohmann::json& spec);

// One marginal design distribution for P_k, X, Q_k, S.
struct Distribution {
    enum class Kind { Constant, Uniform, Normal };
    Kind kind = Kind::Constant;
    double a = 0.0; // constant value / lower bound / mean
    double b = 0.0; // upper bound / sd (normal is truncated at +-3 sd)

    static Distribution constant(double v) { return {Kind::Constant, v, v}; }
    static Distribution uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
    static Distribution normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }

    double draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) const;
    double lower() const;
    double upper() const;
    void validate(const std::string& what) const;
    nlohmann::json to_json() const;
    static Distribution from_json(const nlohmann::json& j);
};

// Design for (P, Q, S, V) and, in exogenous mode, X.
struct Design {
    std::vector<Distribution> prices;
    Distribution income = Distribution::uniform(8.0, 12.0); // exogenous mode only
    std::vector<Distribution> characteristics;
    Distribution instrument = Distribution::uniform(6.5, 10.5);

    void validate(int num_inside_goods) const;
    nlohmann::json to_json() const;
    static Design from_json(const nlohmann::json& j);
};

// Built-in first stage: x = 0.5 * (p_1 + ... + p_{L-1}) + s + v, strictly
// increasing in v.
double first_stage(const Vec& p, double s, double v);

struct DatasetMetadata {
    nlohmann::json system; // the generating system's to_json()
    std::uint64_t seed = 0;
    std::size_t n = 0;
    nlohmann::json design;
    bool endogenous = false;
};

// Column-major cross section. Immutable once built.
struct SimulatedDataset {
    Mat y;     // n x (L-1)
    Mat p;     // n x (L-1)
    Vec x;     // n
    Mat q;     // n x K
    Vec s;     // n
    Vec v_true;
    std::optional<Vec> v_hat;
    DatasetMetadata meta;

    std::size_t size() const { return static_cast<std::size_t>(x.size()); }
    int num_inside_goods() const { return static_cast<int>(y.cols()); }
    int num_characteristics() const { return static_cast<int>(q.cols()); }
    // FNV-1a over the raw bytes of every column.
    std::uint64_t content_hash() const;
};

SimulatedDataset simulate_cross_section(const DemandSystem& system, const Design& design,
                                        std::size_t n, std::uint64_t seed, bool endogenous);

enum class ControlMode { TrueV, Estimated };

// Fills v_hat. Estimated mode regresses X on (P, Q, S) by local-linear kernel
// regression with rule-of-thumb bandwidths and sets v_hat = x - fit.
SimulatedDataset control_residuals(const SimulatedDataset& data, ControlMode mode);

// CSV with header y1..,p1..,x,q1..,s,v_true,v_hat and a JSON sidecar.
void write_dataset_csv(const SimulatedDataset& data, const std::string& csv_path);
SimulatedDataset read_dataset_csv(const std::string& csv_path);
nlohmann::json metadata_json(const DatasetMetadata& meta);
void write_metadata_json(const DatasetMetadata& meta, const std::string& path);
DatasetMetadata read_metadata_json(const std::string& path);

// Assumption-style numeric probes on a box of contexts x share region.
struct ProbeRegion {
    std::vector<std::pair<double, double>> prices; // per inside good
    std::pair<double, double> income{9.0, 11.0};
    std::vector<std::pair<double, double>> shares; // per good, within the law support
};

struct ProbeSettings {
    int context_points_per_axis = 2;
    int share_points_per_axis = 5;
    double neighborhood = 0.005;   // share-space margin around the region
    double density_floor = kDefaultDensityFloor;
    double jump_tolerance = 0.05;  // max CDF increment across one fine cell
    int fine_grid = 400;
    double fd_step = 1e-4;
    double fd_tolerance = 1e-3;    // |FD(h) - FD(h/2)| allowed
};

enum class ProbeStatus { Pass, Warn, Fail };
std::string_view to_string(ProbeStatus s);

struct ProbeItem {
    std::string name;
    ProbeStatus status = ProbeStatus::Pass;
    double measured = 0.0;
    std::string detail;
};

struct RegularityReport {
    std::vector<ProbeItem> items;
    std::string note;
    bool all_pass() const;
    const ProbeItem& item(const std::string& name) const;
};

RegularityReport probe_regularity(const DemandSystem& system, const ProbeRegion& region,
                                  const ProbeSettings& settings = {});
// Region whose share box is [lo + 0.1 (hi - lo), hi - 0.1 (hi - lo)].
ProbeRegion default_interior_region(const DemandSystem& system);

} // namespace sslab
